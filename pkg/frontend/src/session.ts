import type { AnnotationApi } from "./api.js";
import type { Answer, TrancheView } from "./types.js";

export type Phase =
  | { kind: "idle" }
  | {
      kind: "answering";
      tranche: TrancheView;
      answers: (Answer | null)[];
      submitError: string | null;
    }
  | {
      kind: "result";
      status: "accepted" | "discarded" | "recorded";
      note: string | null;
    }
  | { kind: "done"; reason: "quota" | "pool" }
  | { kind: "error"; message: string };

export interface Progress {
  completed: number;
  quota: number;
}

/** One volunteer's labelling session.
 *
 * The session is a thin state machine over the service API: every number
 * it exposes (progress, statuses, notes) is taken from a service
 * response. Submission waits for acknowledgment and retries with the
 * same tranche id, so a dropped response cannot double-count. */
export class VolunteerSession {
  phase: Phase = { kind: "idle" };
  progress: Progress | null = null;

  constructor(
    private readonly api: AnnotationApi,
    readonly volunteerId: string,
  ) {}

  async loadNext(): Promise<Phase> {
    try {
      const result = await this.api.fetchTranche(this.volunteerId);
      if (result.kind === "quota_exhausted") {
        this.phase = { kind: "done", reason: "quota" };
      } else if (result.kind === "pool_exhausted") {
        this.phase = { kind: "done", reason: "pool" };
      } else {
        this.progress = {
          completed: result.view.completed,
          quota: result.view.quota,
        };
        this.phase = {
          kind: "answering",
          tranche: result.view,
          answers: result.view.items.map(() => null),
          submitError: null,
        };
      }
    } catch (err) {
      this.phase = { kind: "error", message: String(err) };
    }
    return this.phase;
  }

  setAnswer(position: number, answer: Answer): void {
    if (this.phase.kind !== "answering") {
      throw new Error("no tranche is open");
    }
    if (position < 0 || position >= this.phase.answers.length) {
      throw new Error(`position ${position} out of range`);
    }
    this.phase.answers[position] = answer;
  }

  get canSubmit(): boolean {
    return (
      this.phase.kind === "answering" &&
      this.phase.answers.every((a) => a !== null)
    );
  }

  async submit(): Promise<Phase> {
    if (this.phase.kind !== "answering") {
      throw new Error("no tranche is open");
    }
    if (!this.canSubmit) {
      throw new Error("all items must be answered before submitting");
    }
    const answering = this.phase;
    const tranche = answering.tranche;
    const answers = answering.answers as Answer[];
    try {
      const result = await this.api.submit(tranche.tranche_id, answers);
      if (result.kind === "duplicate") {
        // an earlier attempt landed; the service refuses a second one
        this.phase = { kind: "result", status: "recorded", note: null };
      } else {
        this.progress = {
          completed: result.response.completed,
          quota: result.response.quota,
        };
        this.phase = {
          kind: "result",
          status: result.response.status,
          note: result.response.note ?? null,
        };
      }
    } catch (err) {
      // stay on the open tranche; a retry reuses the same tranche id
      this.phase = { ...answering, submitError: String(err) };
    }
    return this.phase;
  }
}
