/**
 * Cross-component parity: recompute every fixture record's loss with this
 * package's implementation and compare against the producer's expected
 * values. Agreement within 1e-6 is the pass bar.
 */

import { readFileSync } from "node:fs";

import { LossInputs, totalLoss } from "./loss.js";

export const FIXTURE_SCHEMA = "loss_fixtures.v1";
export const PARITY_TOLERANCE = 1e-6;

export interface FixtureRecord {
  recordId: number;
  inputs: LossInputs;
  alphaNll: number;
  beta: number;
  expectedTotal: number;
}

export interface ParityReport {
  nRecords: number;
  maxAbsDiff: number;
  pass: boolean;
}

function num(record: Record<string, unknown>, key: string, index: number): number {
  const value = record[key];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new Error(`fixture record ${index}: missing numeric "${key}"`);
  }
  return value;
}

export function parseFixturesJsonl(text: string): FixtureRecord[] {
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new Error("empty fixture file");
  }
  const header = JSON.parse(lines[0]) as Record<string, unknown>;
  if (header.schema !== FIXTURE_SCHEMA) {
    throw new Error(`unsupported fixture schema ${JSON.stringify(header.schema)}`);
  }
  return lines.slice(1).map((line, i) => {
    const record = JSON.parse(line) as Record<string, unknown>;
    return {
      recordId: num(record, "record_id", i),
      inputs: {
        policyLogpChosen: num(record, "policy_logp_chosen", i),
        policyLogpRejected: num(record, "policy_logp_rejected", i),
        refLogpChosen: num(record, "ref_logp_chosen", i),
        refLogpRejected: num(record, "ref_logp_rejected", i),
        chosenTokenCount: num(record, "chosen_token_count", i),
      },
      alphaNll: num(record, "alpha_nll", i),
      beta: num(record, "beta", i),
      expectedTotal: num(record, "expected_total", i),
    };
  });
}

export function loadFixtures(path: string): FixtureRecord[] {
  return parseFixturesJsonl(readFileSync(path, "utf-8"));
}

export function computeLosses(records: FixtureRecord[]): number[] {
  return records.map((record) =>
    totalLoss(record.inputs, { alphaNll: record.alphaNll, beta: record.beta }),
  );
}

export function checkFixtures(
  records: FixtureRecord[],
  tolerance: number = PARITY_TOLERANCE,
): ParityReport {
  const totals = computeLosses(records);
  let maxAbsDiff = 0;
  records.forEach((record, i) => {
    maxAbsDiff = Math.max(maxAbsDiff, Math.abs(totals[i] - record.expectedTotal));
  });
  return { nRecords: records.length, maxAbsDiff, pass: maxAbsDiff <= tolerance };
}
