import { describe, expect, it } from "vitest";
import { fileURLToPath } from "node:url";
import path from "node:path";

import {
  DEFAULT_LOSS_CONFIG,
  dpoLoss,
  nllLoss,
  totalLoss,
} from "../src/loss.js";
import { checkFixtures, computeLosses, loadFixtures } from "../src/parity.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.resolve(HERE, "../../fixtures/loss_fixtures.jsonl");

const identity = {
  policyLogpChosen: 0,
  policyLogpRejected: 0,
  refLogpChosen: 0,
  refLogpRejected: 0,
  chosenTokenCount: 1,
};

describe("hybrid loss", () => {
  it("identity inputs give ln 2 for the preference term", () => {
    expect(dpoLoss(identity, DEFAULT_LOSS_CONFIG)).toBeCloseTo(Math.log(2), 12);
  });

  it("identity provider with alpha 0 scores ln 2 total", () => {
    const cfg = { alphaNll: 0, beta: 0.1 };
    expect(totalLoss(identity, cfg)).toBeCloseTo(Math.log(2), 12);
  });

  it("matches the producer's worked example", () => {
    // Four chosen tokens at -ln2 each, policy == reference, alpha = 1.
    const inputs = {
      policyLogpChosen: -4 * Math.log(2),
      policyLogpRejected: 0,
      refLogpChosen: -4 * Math.log(2),
      refLogpRejected: 0,
      chosenTokenCount: 4,
    };
    expect(totalLoss(inputs, DEFAULT_LOSS_CONFIG)).toBeCloseTo(1.386294, 5);
  });

  it("normalizes the NLL term by chosen token count", () => {
    const inputs = { ...identity, policyLogpChosen: -8, chosenTokenCount: 4 };
    expect(nllLoss(inputs)).toBeCloseTo(2.0, 12);
  });

  it("stays finite for extreme margins", () => {
    const inputs = { ...identity, policyLogpChosen: -1e6 };
    expect(Number.isFinite(totalLoss(inputs, DEFAULT_LOSS_CONFIG))).toBe(true);
  });
});

describe("fixture parity", () => {
  it("agrees with the producer within 1e-6 on 100+ records", () => {
    const records = loadFixtures(FIXTURES);
    expect(records.length).toBeGreaterThanOrEqual(100);
    const report = checkFixtures(records);
    expect(report.nRecords).toBe(records.length);
    expect(report.maxAbsDiff).toBeLessThanOrEqual(1e-6);
    expect(report.pass).toBe(true);
  });

  it("pass flag is exactly the tolerance comparison", () => {
    const records = loadFixtures(FIXTURES);
    const strict = checkFixtures(records, 0);
    expect(strict.pass).toBe(strict.maxAbsDiff === 0);
    const loose = checkFixtures(records, 1);
    expect(loose.pass).toBe(true);
  });

  it("computeLosses returns one total per record", () => {
    const records = loadFixtures(FIXTURES);
    const totals = computeLosses(records);
    expect(totals.length).toBe(records.length);
    totals.forEach((value) => expect(Number.isFinite(value)).toBe(true));
  });

  it("detects a corrupted expected value", () => {
    const records = loadFixtures(FIXTURES);
    records[0] = { ...records[0], expectedTotal: records[0].expectedTotal + 0.5 };
    expect(checkFixtures(records).pass).toBe(false);
  });
});
