import type { AnnotationApi } from "./api.js";
import type { AgreementReport, DimensionReport } from "./types.js";

export interface DimensionViewModel {
  resolved: number;
  binaryAgreement: string | null; // rendered to 2 decimals
  weightedAgreement: string | null;
  confusion: { tp: number; fp: number; fn: number; tn: number };
}

export interface DashboardViewModel {
  empty: boolean;
  intent: DimensionViewModel;
  abuse: DimensionViewModel | null;
  pool: { initial: number; remaining: number; resolved: number };
  tranches: { issued: number; accepted: number; discarded: number };
}

function formatRate(value: number | null): string | null {
  return value === null ? null : value.toFixed(2);
}

function dimension(report: DimensionReport): DimensionViewModel {
  return {
    resolved: report.resolved,
    binaryAgreement: formatRate(report.binary_agreement),
    weightedAgreement: formatRate(report.weighted_agreement),
    confusion: report.confusion,
  };
}

/** Format-only projection of the service report; no cell or rate is
 * computed locally. */
export function toViewModel(report: AgreementReport): DashboardViewModel {
  return {
    empty: report.intent.resolved === 0,
    intent: dimension(report.intent),
    abuse: report.abuse ? dimension(report.abuse) : null,
    pool: report.pool,
    tranches: report.tranches,
  };
}

export class AdminDashboard {
  report: AgreementReport | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private readonly api: AnnotationApi) {}

  async refresh(): Promise<DashboardViewModel> {
    this.report = await this.api.report();
    return toViewModel(this.report);
  }

  startPolling(
    intervalMs: number,
    onUpdate: (vm: DashboardViewModel) => void,
    onError: (err: unknown) => void = () => {},
  ): void {
    this.stopPolling();
    const tick = () => this.refresh().then(onUpdate).catch(onError);
    void tick();
    this.timer = setInterval(tick, intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
