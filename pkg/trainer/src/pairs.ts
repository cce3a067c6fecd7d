/**
 * Preference-pair JSONL loading and validation.
 *
 * The file contract: a leading schema record {"schema": "pairs.v1"}, then
 * one object per pair with exactly problem_id / prompt / chosen / rejected
 * / iteration, where chosen and rejected are {reasoning, answer}.
 */

import { readFileSync } from "node:fs";

export const PAIR_SCHEMA = "pairs.v1";

export interface PairSide {
  reasoning: string;
  answer: string;
}

export interface PairRecord {
  problem_id: string;
  prompt: string;
  chosen: PairSide;
  rejected: PairSide;
  iteration: number;
}

/** Validation failure; carries the offending record's index in the file. */
export class SchemaError extends Error {
  constructor(message: string, public readonly recordIndex: number) {
    super(`record ${recordIndex}: ${message}`);
    this.name = "SchemaError";
  }
}

function asSide(value: unknown, field: string, index: number): PairSide {
  if (typeof value !== "object" || value === null) {
    throw new SchemaError(`missing or invalid "${field}"`, index);
  }
  const side = value as Record<string, unknown>;
  if (typeof side.reasoning !== "string" || typeof side.answer !== "string") {
    throw new SchemaError(`"${field}" needs string reasoning and answer`, index);
  }
  if (side.reasoning.length === 0 && side.answer.length === 0) {
    throw new SchemaError(`"${field}" is empty`, index);
  }
  return { reasoning: side.reasoning, answer: side.answer };
}

export function parsePairRecord(raw: unknown, index: number): PairRecord {
  if (typeof raw !== "object" || raw === null) {
    throw new SchemaError("not an object", index);
  }
  const record = raw as Record<string, unknown>;
  if (typeof record.problem_id !== "string" || record.problem_id.length === 0) {
    throw new SchemaError('missing "problem_id"', index);
  }
  if (typeof record.prompt !== "string") {
    throw new SchemaError('missing "prompt"', index);
  }
  if (typeof record.iteration !== "number" || !Number.isInteger(record.iteration)) {
    throw new SchemaError('missing integer "iteration"', index);
  }
  return {
    problem_id: record.problem_id,
    prompt: record.prompt,
    chosen: asSide(record.chosen, "chosen", index),
    rejected: asSide(record.rejected, "rejected", index),
    iteration: record.iteration,
  };
}

export function parsePairsJsonl(text: string): PairRecord[] {
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty file", -1);
  }
  const header = JSON.parse(lines[0]) as Record<string, unknown>;
  if (header.schema !== PAIR_SCHEMA) {
    throw new SchemaError(`unsupported schema ${JSON.stringify(header.schema)}`, -1);
  }
  return lines.slice(1).map((line, i) => parsePairRecord(JSON.parse(line), i));
}

export function loadPairs(path: string): PairRecord[] {
  return parsePairsJsonl(readFileSync(path, "utf-8"));
}

/** Serialize records back to the same JSONL contract (sorted keys). */
export function dumpPairs(records: PairRecord[]): string {
  const sorted = (record: PairRecord): unknown => ({
    chosen: { answer: record.chosen.answer, reasoning: record.chosen.reasoning },
    iteration: record.iteration,
    problem_id: record.problem_id,
    prompt: record.prompt,
    rejected: { answer: record.rejected.answer, reasoning: record.rejected.reasoning },
  });
  const lines = [JSON.stringify({ schema: PAIR_SCHEMA })];
  for (const record of records) {
    lines.push(JSON.stringify(sorted(record)));
  }
  return lines.join("\n") + "\n";
}
