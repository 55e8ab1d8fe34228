import type { DashboardViewModel } from "./dashboard.js";
import type { Phase, Progress } from "./session.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderProgress(progress: Progress | null): string {
  if (!progress) return "";
  return `<p class="progress">Tranches completed: ${progress.completed} / ${progress.quota}</p>`;
}

/** All six items render identically; nothing distinguishes the qualifier. */
export function renderSession(phase: Phase, progress: Progress | null): string {
  switch (phase.kind) {
    case "idle":
      return `<p>Loading your first tranche…</p>`;
    case "answering": {
      const rows = phase.tranche.items
        .map((item, i) => {
          const answer = phase.answers[i];
          const pick = (field: "intentful" | "abusive", value: boolean) =>
            answer && answer[field] === value ? "checked" : "";
          return `
          <li class="item" data-position="${item.position}">
            <blockquote>${esc(item.text)}</blockquote>
            <span>Intentful?
              <label><input type="radio" name="intent-${i}" value="yes" ${pick("intentful", true)}> yes</label>
              <label><input type="radio" name="intent-${i}" value="no" ${pick("intentful", false)}> no</label>
            </span>
            <span>Abusive?
              <label><input type="radio" name="abuse-${i}" value="yes" ${pick("abusive", true)}> yes</label>
              <label><input type="radio" name="abuse-${i}" value="no" ${pick("abusive", false)}> no</label>
            </span>
          </li>`;
        })
        .join("\n");
      const ready = phase.answers.every((a) => a !== null);
      const error = phase.submitError
        ? `<p class="error">Submission failed (${esc(phase.submitError)}). Your answers are kept; please retry.</p>`
        : "";
      return `${renderProgress(progress)}
        <ol class="tranche">${rows}</ol>
        ${error}
        <button id="submit" ${ready ? "" : "disabled"}>Submit answers</button>`;
    }
    case "result": {
      const note = phase.note ? `<p class="note">${esc(phase.note)}</p>` : "";
      const heading =
        phase.status === "accepted"
          ? "Answers recorded, thank you."
          : phase.status === "discarded"
            ? "This tranche was not counted."
            : "This tranche was already recorded.";
      return `${renderProgress(progress)}
        <p class="result-${phase.status}">${heading}</p>${note}
        <button id="next">Next tranche</button>`;
    }
    case "done":
      return phase.reason === "quota"
        ? `${renderProgress(progress)}<p class="thanks">That's all — thank you for taking part!</p>`
        : `${renderProgress(progress)}<p class="thanks">No more segments need votes. Thank you!</p>`;
    case "error":
      return `<p class="error">The study service is unreachable (${esc(phase.message)}).</p>
        <button id="retry">Retry</button>`;
  }
}

export function renderDashboard(vm: DashboardViewModel): string {
  if (vm.empty) {
    return `<p class="empty">No segments resolved yet.</p>
      <p>Pool: ${vm.pool.remaining} of ${vm.pool.initial} remaining.</p>`;
  }
  const { tp, fp, fn, tn } = vm.intent.confusion;
  const abuse = vm.abuse
    ? `<p>Abuse agreement: binary ${vm.abuse.binaryAgreement}, weighted ${vm.abuse.weightedAgreement} over ${vm.abuse.resolved} resolved.</p>`
    : "";
  return `
    <h2>Intent agreement</h2>
    <p>${vm.intent.resolved} segments resolved.
       Binary agreement ${vm.intent.binaryAgreement},
       weighted agreement ${vm.intent.weightedAgreement}.</p>
    <table class="confusion">
      <tr><th></th><th>human: intent</th><th>human: no intent</th></tr>
      <tr><th>model: intent</th><td id="tp">${tp}</td><td id="fp">${fp}</td></tr>
      <tr><th>model: no intent</th><td id="fn">${fn}</td><td id="tn">${tn}</td></tr>
    </table>
    ${abuse}
    <p>Pool: ${vm.pool.remaining} of ${vm.pool.initial} remaining,
       ${vm.pool.resolved} resolved.
       Tranches: ${vm.tranches.accepted} accepted, ${vm.tranches.discarded} discarded.</p>`;
}
