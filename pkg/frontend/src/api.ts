import type {
  AgreementReport,
  Answer,
  SubmitResult,
  TrancheResult,
  TrancheView,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

/** Typed client for the annotation service. Network failures throw; the
 * service's protocol refusals (quota, pool, duplicate) come back as
 * discriminated results so callers can render them. */
export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}/api/v1${path}`;
  }

  async fetchTranche(volunteerId: string): Promise<TrancheResult> {
    const resp = await this.fetchImpl(this.url("/tranche"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ volunteer_id: volunteerId }),
    });
    if (resp.status === 403) return { kind: "quota_exhausted" };
    if (resp.status === 409) return { kind: "pool_exhausted" };
    if (!resp.ok) throw new Error(`tranche request failed: ${resp.status}`);
    const view = (await resp.json()) as TrancheView;
    return { kind: "tranche", view };
  }

  async submit(trancheId: string, answers: Answer[]): Promise<SubmitResult> {
    const resp = await this.fetchImpl(this.url("/submit"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ tranche_id: trancheId, answers }),
    });
    if (resp.status === 409) return { kind: "duplicate" };
    if (!resp.ok) throw new Error(`submit failed: ${resp.status}`);
    return { kind: "submitted", response: await resp.json() };
  }

  async report(): Promise<AgreementReport> {
    const resp = await this.fetchImpl(this.url("/report"));
    if (!resp.ok) throw new Error(`report failed: ${resp.status}`);
    return (await resp.json()) as AgreementReport;
  }
}
