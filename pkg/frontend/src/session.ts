// Headless play-screen controller: polling, choice submission, feedback
// flashes, and the countdown. The DOM layer only renders the snapshots
// this controller emits, which keeps every behavior testable in node.

import { ApiError, DrillApi, SessionStatePayload } from "./api.js";
import { Countdown, FlashColor, ViewState, renderNode } from "./view.js";

export interface SessionControllerOptions {
  pollIntervalMs?: number;
  flashMs?: number;
  now?: () => number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class SessionController {
  readonly pollIntervalMs: number;
  readonly flashMs: number;

  private view: ViewState;
  private readonly countdown: Countdown;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly listeners = new Set<(view: ViewState) => void>();
  private commandInFlight = false;
  private stateSequence = 0;
  /** Every flash shown, in order, for conformance checking. */
  readonly flashesShown: FlashColor[] = [];

  constructor(
    private readonly api: DrillApi,
    private readonly sessionId: string,
    initialState: SessionStatePayload,
    options: SessionControllerOptions = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 500;
    this.flashMs = options.flashMs ?? 600;
    this.countdown = new Countdown(options.now);
    this.sleep = options.sleep ?? defaultSleep;
    this.view = renderNode(initialState);
    this.countdown.sync(initialState.timeout_remaining_ms ?? null);
  }

  get state(): ViewState {
    return this.view;
  }

  subscribe(listener: (view: ViewState) => void): () => void {
    this.listeners.add(listener);
    listener(this.view);
    return () => this.listeners.delete(listener);
  }

  private emit(view: ViewState): void {
    this.view = view;
    for (const listener of this.listeners) listener(view);
  }

  private applyServerState(state: SessionStatePayload, sequence: number): void {
    if (sequence < this.stateSequence) return; // stale poll: render only newest
    this.stateSequence = sequence;
    this.countdown.sync(state.finished ? null : state.timeout_remaining_ms);
    const next = renderNode(state);
    this.emit({ ...next, lastFeedback: this.view.lastFeedback });
  }

  /** Poll the server; safe to run concurrently with a pending command. */
  async refresh(): Promise<void> {
    const sequence = ++this.stateSequence;
    const state = await this.api.getState(this.sessionId);
    this.applyServerState(state, sequence);
  }

  /** Local countdown tick between polls; emits when the value changes. */
  tick(): void {
    if (this.view.phase !== "playing") return;
    const remaining = this.countdown.remaining();
    if (remaining !== this.view.countdownMs) {
      this.emit({ ...this.view, countdownMs: remaining });
    }
  }

  /**
   * Submit a choice. The returned color is flashed for at least
   * `flashMs` before the next node renders; re-entrant clicks while a
   * command is pending are ignored; a conflict (stale option, timeout
   * fired first) silently refetches the state.
   */
  async choose(optionId: string): Promise<FlashColor | null> {
    if (this.commandInFlight || !this.view.buttonsEnabled) return null;
    if (!this.view.options.some((o) => o.id === optionId)) return null;
    this.commandInFlight = true;
    this.emit({ ...this.view, buttonsEnabled: false });
    try {
      const sequence = ++this.stateSequence;
      const reply = await this.api.postChoice(this.sessionId, optionId);
      this.flashesShown.push(reply.color);
      this.emit({
        ...this.view,
        phase: "flash",
        lastFeedback: reply.color,
        countdownMs: null,
        buttonsEnabled: false,
      });
      await this.sleep(this.flashMs);
      this.applyServerState(reply.state, sequence);
      return reply.color;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        await this.refresh();
        return null;
      }
      // network or server trouble: keep the current node on screen so
      // the trainee can retry
      this.emit({ ...this.view, buttonsEnabled: true });
      throw error;
    } finally {
      this.commandInFlight = false;
      if (!this.view.buttonsEnabled && this.view.phase === "playing") {
        this.emit({ ...this.view, buttonsEnabled: true });
      }
    }
  }
}

/** Create a participant and session, returning a ready controller. */
export async function startDrill(
  api: DrillApi,
  scenarioId: string,
  group: "staff" | "visitor",
  options: SessionControllerOptions = {},
): Promise<{ participantId: string; controller: SessionController }> {
  const participant = await api.createParticipant(group);
  const session = await api.createSession(scenarioId, participant.id);
  return {
    participantId: participant.id,
    controller: new SessionController(api, session.session_id, session.state, options),
  };
}
