// View-state derivation: everything the play screen shows is computed
// here from server payloads, so it can be tested without a DOM.

import type { SessionStatePayload } from "./api.js";

export type FlashColor = "green" | "red";

export type ViewPhase = "playing" | "flash" | "report";

export interface OptionButton {
  id: string;
  label: string;
}

export interface ViewState {
  sessionId: string;
  phase: ViewPhase;
  prompt: string | null;
  /** One button per option, in the authored order the server sent. */
  options: OptionButton[];
  /** Milliseconds left on the node's timeout, or null when it has none. */
  countdownMs: number | null;
  /** The color of the most recent feedback flash; never computed locally. */
  lastFeedback: FlashColor | null;
  buttonsEnabled: boolean;
}

export function renderNode(state: SessionStatePayload): ViewState {
  if (state.finished) {
    return {
      sessionId: state.session_id,
      phase: "report",
      prompt: null,
      options: [],
      countdownMs: null,
      lastFeedback: null,
      buttonsEnabled: false,
    };
  }
  return {
    sessionId: state.session_id,
    phase: "playing",
    prompt: state.prompt,
    options: state.options.map((o) => ({ id: o.id, label: o.label })),
    countdownMs: state.timeout_remaining_ms,
    lastFeedback: null,
    buttonsEnabled: true,
  };
}

/**
 * Client-side countdown between polls. The displayed value decays with
 * local time but is clamped so it can never exceed what the server said
 * was remaining at the last sync.
 */
export class Countdown {
  private syncedRemaining: number | null = null;
  private syncedAt = 0;

  constructor(private readonly now: () => number = () => Date.now()) {}

  sync(remainingMs: number | null): void {
    this.syncedRemaining = remainingMs;
    this.syncedAt = this.now();
  }

  remaining(): number | null {
    if (this.syncedRemaining === null) return null;
    const decayed = this.syncedRemaining - (this.now() - this.syncedAt);
    return Math.max(0, Math.min(this.syncedRemaining, decayed));
  }
}
