import { describe, expect, it } from "vitest";

import {
  ENGAGEMENT_STATEMENT,
  QuestionnaireForm,
  SCALE_VALUES,
  SELF_EFFICACY_STATEMENTS,
  TRAINING_EFFICACY_STATEMENT,
  batteriesForPhase,
  isBatteryAllowed,
} from "../src/questionnaire.js";

describe("battery specs", () => {
  it("renders the six self-efficacy statements at the pre phase", () => {
    const batteries = batteriesForPhase("pre");
    expect(batteries).toHaveLength(1);
    expect(batteries[0]!.battery).toBe("self_efficacy");
    expect(batteries[0]!.statements).toHaveLength(6);
    expect(batteries[0]!.statements[0]).toBe(
      "I am confident that I am able to effectively deal with an earthquake emergency",
    );
    expect(batteries[0]!.statements[4]).toBe(
      "I would be able to deal with an earthquake emergency even if the exit is blocked",
    );
  });

  it("adds training-efficacy and engagement only after training", () => {
    const post = batteriesForPhase("post").map((b) => b.battery);
    expect(post).toEqual(["self_efficacy", "training_efficacy", "engagement"]);
    expect(batteriesForPhase("pre").map((b) => b.battery)).toEqual(["self_efficacy"]);
    expect(isBatteryAllowed("engagement", "pre")).toBe(false);
    expect(isBatteryAllowed("engagement", "post")).toBe(true);
    expect(isBatteryAllowed("self_efficacy", "pre")).toBe(true);
  });

  it("uses the single-statement wordings for the post-only items", () => {
    const post = batteriesForPhase("post");
    expect(post[1]!.statements).toEqual([TRAINING_EFFICACY_STATEMENT]);
    expect(post[2]!.statements).toEqual([ENGAGEMENT_STATEMENT]);
  });
});

describe("QuestionnaireForm", () => {
  it("refuses to build a gated form", () => {
    expect(() => new QuestionnaireForm("engagement", "pre", [ENGAGEMENT_STATEMENT]))
      .toThrow(/after the training/);
  });

  it("offers exactly the seven scale values, -3 to +3", () => {
    expect(SCALE_VALUES).toEqual([-3, -2, -1, 0, 1, 2, 3]);
  });

  it("rejects values outside the scale, so an 8th point is impossible", () => {
    const form = new QuestionnaireForm("self_efficacy", "pre", SELF_EFFICACY_STATEMENTS);
    expect(() => form.setAnswer(0, 4)).toThrow(/integers in/);
    expect(() => form.setAnswer(0, -4)).toThrow(/integers in/);
    expect(() => form.setAnswer(0, 1.5)).toThrow(/integers in/);
    form.setAnswer(0, 3);
    expect(form.answer(0)).toBe(3);
  });

  it("blocks submission until every statement is answered", () => {
    const form = new QuestionnaireForm("self_efficacy", "pre", SELF_EFFICACY_STATEMENTS);
    for (let i = 0; i < 5; i++) form.setAnswer(i, 0);
    expect(form.isComplete()).toBe(false);
    expect(() => form.values()).toThrow(/incomplete/);
    form.setAnswer(5, -2);
    expect(form.isComplete()).toBe(true);
    expect(form.values()).toEqual([0, 0, 0, 0, 0, -2]);
  });

  it("lets answers be revised before submission", () => {
    const form = new QuestionnaireForm("engagement", "post", [ENGAGEMENT_STATEMENT]);
    form.setAnswer(0, -3);
    form.setAnswer(0, 2);
    expect(form.values()).toEqual([2]);
  });
});
