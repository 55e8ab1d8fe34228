// Browser entry point: volunteer view by default, admin dashboard with
// ?admin=1. Session identity comes from a volunteer token in the URL.

import { AnnotationApi } from "./api.js";
import { AdminDashboard } from "./dashboard.js";
import { renderDashboard, renderSession } from "./render.js";
import { VolunteerSession } from "./session.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8765";
const api = new AnnotationApi(baseUrl);
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

function wireVolunteer(): void {
  const volunteerId = params.get("volunteer") ?? "";
  if (!volunteerId) {
    root!.innerHTML = `<p class="error">Missing volunteer token: open this page
      with ?volunteer=&lt;your-token&gt;.</p>`;
    return;
  }
  const session = new VolunteerSession(api, volunteerId);

  const paint = () => {
    root!.innerHTML = renderSession(session.phase, session.progress);
  };

  root!.addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    if (session.phase.kind !== "answering" || input.type !== "radio") return;
    const item = input.closest<HTMLElement>(".item");
    if (!item) return;
    const position = Number(item.dataset.position);
    const current = session.phase.answers[position];
    const next = {
      intentful: current?.intentful ?? false,
      abusive: current?.abusive ?? false,
    };
    const value = input.value === "yes";
    if (input.name.startsWith("intent-")) next.intentful = value;
    else next.abusive = value;
    // an item counts as answered once both radio groups have been touched
    const touched = item.querySelectorAll("input:checked").length;
    if (touched >= 2 || current !== null) session.setAnswer(position, next);
    paint();
  });

  root!.addEventListener("click", async (event) => {
    const button = event.target as HTMLElement;
    if (button.id === "submit" && session.canSubmit) {
      (button as HTMLButtonElement).disabled = true;
      await session.submit();
      paint();
    } else if (button.id === "next" || button.id === "retry") {
      await session.loadNext();
      paint();
    }
  });

  void session.loadNext().then(paint);
}

function wireAdmin(): void {
  const dashboard = new AdminDashboard(api);
  dashboard.startPolling(
    3000,
    (vm) => {
      root!.innerHTML = renderDashboard(vm);
    },
    () => {
      root!.innerHTML = `<p class="error">Report endpoint unreachable; retrying…</p>`;
    },
  );
}

if (params.get("admin") === "1") wireAdmin();
else wireVolunteer();
