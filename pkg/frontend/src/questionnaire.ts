// Questionnaire form models: the exact statement texts, the 7-point
// agreement scale, and the phase gating (self-efficacy before and after
// training; training-efficacy and engagement only after).

import type { BatteryName, QuestionnairePhase } from "./api.js";

export const SCALE_MIN = -3;
export const SCALE_MAX = 3;

export const SELF_EFFICACY_STATEMENTS: readonly string[] = [
  "I am confident that I am able to effectively deal with an earthquake emergency",
  "Thanks to my resources, I know how to manage in an earthquake emergency",
  "I would be able to deal with an earthquake emergency even if the building is severely damaged",
  "I would be able to deal with an earthquake emergency even if I find flame and fire along the way",
  "I would be able to deal with an earthquake emergency even if the exit is blocked",
  "I would be able to deal with an earthquake emergency even if I find objects that may harm me along the way.",
];

export const TRAINING_EFFICACY_STATEMENT =
  "I could easily learn the recommendations provided in the virtual game.";

export const ENGAGEMENT_STATEMENT = "The game was engaging/fun.";

export interface BatterySpec {
  battery: BatteryName;
  statements: readonly string[];
}

/** The batteries a participant fills in at the given phase, in order. */
export function batteriesForPhase(phase: QuestionnairePhase): BatterySpec[] {
  const batteries: BatterySpec[] = [
    { battery: "self_efficacy", statements: SELF_EFFICACY_STATEMENTS },
  ];
  if (phase === "post") {
    batteries.push(
      { battery: "training_efficacy", statements: [TRAINING_EFFICACY_STATEMENT] },
      { battery: "engagement", statements: [ENGAGEMENT_STATEMENT] },
    );
  }
  return batteries;
}

export function isBatteryAllowed(battery: BatteryName, phase: QuestionnairePhase): boolean {
  return battery === "self_efficacy" || phase === "post";
}

/** The radio values every statement offers: -3 (strongly disagree) .. +3. */
export const SCALE_VALUES: readonly number[] = [-3, -2, -1, 0, 1, 2, 3];

export class QuestionnaireForm {
  private readonly answers: (number | null)[];

  constructor(
    readonly battery: BatteryName,
    readonly phase: QuestionnairePhase,
    readonly statements: readonly string[],
  ) {
    if (!isBatteryAllowed(battery, phase)) {
      throw new Error(`${battery} is only administered after the training`);
    }
    this.answers = statements.map(() => null);
  }

  setAnswer(index: number, value: number): void {
    if (index < 0 || index >= this.answers.length) {
      throw new Error(`no statement at index ${index}`);
    }
    if (!Number.isInteger(value) || value < SCALE_MIN || value > SCALE_MAX) {
      throw new Error(`answers must be integers in [${SCALE_MIN}, ${SCALE_MAX}]`);
    }
    this.answers[index] = value;
  }

  answer(index: number): number | null {
    return this.answers[index] ?? null;
  }

  /** Submission stays blocked until every statement has an answer. */
  isComplete(): boolean {
    return this.answers.every((a) => a !== null);
  }

  values(): number[] {
    if (!this.isComplete()) {
      throw new Error("questionnaire is incomplete");
    }
    return this.answers.map((a) => a as number);
  }
}
