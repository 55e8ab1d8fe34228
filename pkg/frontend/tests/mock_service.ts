// Scripted stand-in for the annotation service: deterministic tranche
// content and statuses, plus fault injection for network-failure paths.

import type { AgreementReport, Answer, SubmitResponse } from "../src/types.js";
import type { FetchLike } from "../src/api.js";

export interface MockOptions {
  quota?: number;
  // tranche sequence numbers (1-based) the mock will report as discarded
  discardOn?: number[];
  // fail the Nth submit call (1-based) with a network error BEFORE the
  // mock records anything
  dropSubmitCall?: number;
  // fail the Nth submit call AFTER recording, so the retry sees 409
  dropResponseOf?: number;
  report?: AgreementReport;
}

export interface RecordedSubmission {
  trancheId: string;
  answers: Answer[];
  status: "accepted" | "discarded";
}

export function makeReport(overrides: Partial<AgreementReport> = {}): AgreementReport {
  return {
    version: 1,
    intent: {
      resolved: 100,
      binary_agreement: 0.8,
      weighted_agreement: 0.81,
      confusion: { tp: 40, fp: 10, fn: 20, tn: 30 },
    },
    pool: { initial: 5000, remaining: 4900, resolved: 100 },
    tranches: { issued: 30, accepted: 28, discarded: 2 },
    ...overrides,
  };
}

export class MockService {
  issued = 0;
  submitCalls = 0;
  submissions: RecordedSubmission[] = [];
  completedByVolunteer = new Map<string, number>();
  private open = new Map<string, { volunteerId: string; seq: number }>();

  constructor(private readonly options: MockOptions = {}) {}

  get quota(): number {
    return this.options.quota ?? 6;
  }

  readonly fetch: FetchLike = async (url, init) => {
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    if (url.endsWith("/api/v1/tranche")) return this.issueTranche(body);
    if (url.endsWith("/api/v1/submit")) return this.submit(body);
    if (url.endsWith("/api/v1/report")) return json(200, this.options.report ?? makeReport());
    return json(404, { detail: "unknown endpoint" });
  };

  private issueTranche(body: { volunteer_id: string }): Response {
    const volunteer = body.volunteer_id;
    const completed = this.completedByVolunteer.get(volunteer) ?? 0;
    if (completed >= this.quota) {
      return json(403, { detail: "quota_exhausted" });
    }
    this.issued += 1;
    const id = `mock-t${this.issued}`;
    this.open.set(id, { volunteerId: volunteer, seq: this.issued });
    const items = Array.from({ length: 6 }, (_, i) => ({
      position: i,
      text: `tranche ${this.issued} segment ${i}`,
    }));
    return json(200, {
      tranche_id: id,
      items,
      completed,
      quota: this.quota,
    });
  }

  private submit(body: { tranche_id: string; answers: Answer[] }): Response {
    this.submitCalls += 1;
    if (this.options.dropSubmitCall === this.submitCalls) {
      throw new TypeError("network dropped");
    }
    const open = this.open.get(body.tranche_id);
    if (!open) {
      const known = this.submissions.some((s) => s.trancheId === body.tranche_id);
      return json(known ? 409 : 404, {
        detail: known ? "duplicate_submission" : "unknown_tranche",
      });
    }
    const status = (this.options.discardOn ?? []).includes(open.seq)
      ? "discarded"
      : "accepted";
    this.open.delete(body.tranche_id);
    this.submissions.push({ trancheId: body.tranche_id, answers: body.answers, status });
    const completed = (this.completedByVolunteer.get(open.volunteerId) ?? 0) + 1;
    this.completedByVolunteer.set(open.volunteerId, completed);
    if (this.options.dropResponseOf === this.submitCalls) {
      throw new TypeError("network dropped after processing");
    }
    const response: SubmitResponse = {
      status,
      votes_recorded: status === "accepted" ? 5 : 0,
      completed,
      quota: this.quota,
      note:
        status === "discarded"
          ? "This tranche was set aside by the study's qualification check and its answers were not counted."
          : null,
    };
    return json(200, response);
  }
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}
