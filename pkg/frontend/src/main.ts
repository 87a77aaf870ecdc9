// DOM glue. All decisions live in the controller/form/report modules;
// this file only draws their state and forwards events.

import { ApiError, DrillApi, QuestionnairePhase } from "./api.js";
import { QuestionnaireForm, SCALE_VALUES, batteriesForPhase } from "./questionnaire.js";
import { reportView } from "./report.js";
import { SessionController } from "./session.js";
import type { ViewState } from "./view.js";

const SCENARIO_ID = "ACH Evacuation Drill";
const app = document.getElementById("app") as HTMLElement;
const api = new DrillApi(localStorage.getItem("quakedrill-api") ?? "");

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function clear(): void {
  app.replaceChildren();
}

// --- setup screen -----------------------------------------------------------

function showSetup(): void {
  clear();
  const card = el("div", "card");
  card.append(el("h1", "", "Earthquake evacuation drill"));
  card.append(el("p", "", "You will walk through a simulated earthquake and evacuation. " +
    "At each stopping point, press the action panel you would choose in real life."));
  const label = el("label", "", "I am a ");
  const select = el("select");
  for (const group of ["visitor", "staff"]) {
    const option = el("option", "", group);
    option.value = group;
    select.append(option);
  }
  label.append(select);
  card.append(label);
  const start = el("button", "primary", "Begin");
  start.addEventListener("click", () => {
    start.disabled = true;
    beginFlow(select.value as "staff" | "visitor").catch(showError);
  });
  card.append(start);
  app.append(card);
}

function showError(error: unknown): void {
  const banner = el("div", "banner error");
  banner.textContent = error instanceof ApiError
    ? `Server said: ${error.message}`
    : "Connection trouble. Retrying may help.";
  app.prepend(banner);
  setTimeout(() => banner.remove(), 4000);
}

// --- questionnaires ----------------------------------------------------------

async function runQuestionnaires(participantId: string, phase: QuestionnairePhase): Promise<void> {
  for (const spec of batteriesForPhase(phase)) {
    const form = new QuestionnaireForm(spec.battery, phase, spec.statements);
    await new Promise<void>((resolve) => {
      clear();
      const card = el("div", "card");
      card.append(el("h2", "", phase === "pre"
        ? "Before we start, a few questions"
        : "A few questions about the experience"));
      card.append(el("p", "hint",
        "-3 means you strongly disagree, +3 means you strongly agree."));
      spec.statements.forEach((statement, index) => {
        const row = el("fieldset", "statement");
        row.append(el("legend", "", statement));
        for (const value of SCALE_VALUES) {
          const label = el("label", "scale");
          const radio = el("input");
          radio.type = "radio";
          radio.name = `q${index}`;
          radio.value = String(value);
          radio.addEventListener("change", () => {
            form.setAnswer(index, value);
            submit.disabled = !form.isComplete();
          });
          label.append(radio, el("span", "", value > 0 ? `+${value}` : String(value)));
          row.append(label);
        }
        card.append(row);
      });
      const submit = el("button", "primary", "Submit");
      submit.disabled = true; // incomplete forms cannot be submitted
      submit.addEventListener("click", async () => {
        try {
          await api.submitQuestionnaire(participantId, phase, spec.battery, form.values());
          resolve();
        } catch (error) {
          showError(error);
        }
      });
      card.append(submit);
      app.append(card);
    });
  }
}

// --- play screen --------------------------------------------------------------

function drawPlay(view: ViewState, controller: SessionController): void {
  clear();
  const card = el("div", "card");

  if (view.phase === "flash" && view.lastFeedback) {
    // show exactly the server's color, nothing computed locally
    const flash = el("div", `flash ${view.lastFeedback}`);
    flash.append(el("span", "", view.lastFeedback === "green"
      ? "Recommended action"
      : "Not a recommended action"));
    app.append(flash);
    return;
  }

  if (view.prompt !== null) card.append(el("p", "prompt", view.prompt));

  if (view.countdownMs !== null) {
    const seconds = Math.ceil(view.countdownMs / 1000);
    card.append(el("p", "countdown", `Act within ${seconds} s`));
  }

  const panel = el("div", "panel");
  for (const option of view.options) {
    const button = el("button", "action", option.label);
    button.disabled = !view.buttonsEnabled;
    button.addEventListener("click", () => {
      controller.choose(option.id).catch(showError);
    });
    panel.append(button);
  }
  card.append(panel);
  app.append(card);
}

async function showReport(sessionId: string): Promise<void> {
  const assessment = await api.getAssessment(sessionId);
  const view = reportView(assessment);
  clear();
  const card = el("div", "card");
  card.append(el("h2", "", "Your drill, behavior by behavior"));
  const list = el("ul", "badges");
  for (const badge of view.badges) {
    const item = el("li", `badge ${badge.status}`);
    item.append(el("span", "tag", badge.tag.replaceAll("_", " ")));
    item.append(el("span", "status", badge.label));
    list.append(item);
  }
  card.append(list);

  card.append(el("h2", "", "Step through your choices"));
  let step = 0;
  const caption = el("p", "caption");
  const rationale = el("p", "rationale");
  const draw = () => {
    const entry = view.playback[step];
    if (!entry) return;
    caption.textContent = `${step + 1}/${view.playback.length}: ${entry.caption}`;
    rationale.textContent = entry.rationale;
    rationale.className = entry.recommended ? "rationale good" : "rationale bad";
  };
  const controls = el("div", "controls");
  const back = el("button", "", "Previous");
  const forward = el("button", "", "Next");
  back.addEventListener("click", () => { step = Math.max(0, step - 1); draw(); });
  forward.addEventListener("click", () => {
    step = Math.min(view.playback.length - 1, step + 1);
    draw();
  });
  controls.append(back, forward);
  card.append(caption, rationale, controls);
  app.append(card);
  draw();
}

// --- flow ----------------------------------------------------------------------

async function beginFlow(group: "staff" | "visitor"): Promise<void> {
  // the drill session (and its ten-second hazard clock) starts only
  // after the pre-training questionnaire is done
  const participant = await api.createParticipant(group);
  const participantId = participant.id;
  await runQuestionnaires(participantId, "pre");
  const session = await api.createSession(SCENARIO_ID, participantId);
  const controller = new SessionController(api, session.session_id, session.state);

  const pollTimer = setInterval(() => {
    controller.refresh().catch(() => {
      /* poll failures are retried on the next interval */
    });
  }, controller.pollIntervalMs);
  const tickTimer = setInterval(() => controller.tick(), 100);

  await new Promise<void>((resolve) => {
    controller.subscribe((view) => {
      if (view.phase === "report") {
        resolve();
      } else {
        drawPlay(view, controller);
      }
    });
  });

  clearInterval(pollTimer);
  clearInterval(tickTimer);
  await runQuestionnaires(participantId, "post");
  await showReport(controller.state.sessionId);
}

showSetup();
