// Post-game report screen model: the behavior checklist with status
// badges plus the step-through playback of every choice.

import type { AssessmentPayload } from "./api.js";

export type BadgeStatus = "performed" | "declined" | "timed_out" | "not_encountered";

export const BADGE_LABELS: Record<BadgeStatus, string> = {
  performed: "Performed",
  declined: "Declined",
  timed_out: "Timed out",
  not_encountered: "Not encountered",
};

export interface BehaviorBadge {
  tag: string;
  status: BadgeStatus;
  label: string;
  rationale: string;
}

export interface PlaybackStep {
  index: number;
  caption: string;
  recommended: boolean;
  rationale: string;
}

export interface ReportView {
  sessionId: string;
  badges: BehaviorBadge[];
  playback: PlaybackStep[];
  summary: Record<string, number>;
}

export function reportView(assessment: AssessmentPayload): ReportView {
  return {
    sessionId: assessment.session_id,
    badges: assessment.outcomes.map((o) => ({
      tag: o.behavior_tag,
      status: o.status,
      label: BADGE_LABELS[o.status],
      rationale: o.rationale,
    })),
    playback: assessment.playback.map((p, index) => ({
      index,
      caption: p.label,
      recommended: p.recommended,
      rationale: p.rationale,
    })),
    summary: { ...assessment.score_summary },
  };
}
