// Wire types for the annotation service API (v1). The UI displays these
// verbatim; it never derives resolution or agreement values itself.

export interface TrancheItem {
  position: number;
  text: string;
}

export interface TrancheView {
  tranche_id: string;
  items: TrancheItem[];
  completed: number;
  quota: number;
}

export interface Answer {
  intentful: boolean;
  abusive: boolean;
}

export interface SubmitResponse {
  status: "accepted" | "discarded";
  votes_recorded: number;
  completed: number;
  quota: number;
  note?: string | null;
}

export interface DimensionReport {
  resolved: number;
  binary_agreement: number | null;
  weighted_agreement: number | null;
  confusion: { tp: number; fp: number; fn: number; tn: number };
}

export interface AgreementReport {
  version: number;
  intent: DimensionReport;
  abuse?: DimensionReport;
  pool: { initial: number; remaining: number; resolved: number };
  tranches: { issued: number; accepted: number; discarded: number };
}

export type TrancheResult =
  | { kind: "tranche"; view: TrancheView }
  | { kind: "quota_exhausted" }
  | { kind: "pool_exhausted" };

export type SubmitResult =
  | { kind: "submitted"; response: SubmitResponse }
  | { kind: "duplicate" };
