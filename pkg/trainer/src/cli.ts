#!/usr/bin/env node
/**
 * warrior-train: consume the producer's JSONL contracts.
 *
 *   warrior-train check --fixtures <path> [--tolerance 1e-6]
 *   warrior-train toy --pairs <path> --steps <n> [--lr 0.1]
 */

import { loadPairs } from "./pairs.js";
import { PARITY_TOLERANCE, checkFixtures, loadFixtures } from "./parity.js";
import { toyTrain } from "./toytrain.js";

function flagValue(argv: string[], flag: string): string | undefined {
  const index = argv.indexOf(flag);
  return index >= 0 && index + 1 < argv.length ? argv[index + 1] : undefined;
}

function usage(): never {
  console.error(
    "usage: warrior-train check --fixtures <path> [--tolerance t]\n" +
      "       warrior-train toy --pairs <path> --steps <n> [--lr x]",
  );
  process.exit(2);
}

function runCheck(argv: string[]): number {
  const fixtures = flagValue(argv, "--fixtures");
  if (!fixtures) {
    usage();
  }
  const tolerance = Number(flagValue(argv, "--tolerance") ?? PARITY_TOLERANCE);
  const report = checkFixtures(loadFixtures(fixtures), tolerance);
  console.log(
    `parity ${report.pass ? "ok" : "FAILED"}: ${report.nRecords} records, ` +
      `max |diff| = ${report.maxAbsDiff.toExponential(3)} (tol ${tolerance})`,
  );
  return report.pass ? 0 : 1;
}

function runToy(argv: string[]): number {
  const pairsPath = flagValue(argv, "--pairs");
  const steps = Number(flagValue(argv, "--steps") ?? "50");
  if (!pairsPath || !Number.isInteger(steps) || steps < 1) {
    usage();
  }
  const learningRate = Number(flagValue(argv, "--lr") ?? "0.1");
  const records = loadPairs(pairsPath);
  const trajectory = toyTrain(records, steps, learningRate);
  const first = trajectory[0];
  const last = trajectory[trajectory.length - 1];
  trajectory.forEach((value, step) => {
    if (step % 10 === 0 || step === trajectory.length - 1) {
      console.log(`step ${step.toString().padStart(3)}  mean loss ${value.toFixed(6)}`);
    }
  });
  console.log(
    `trained on ${records.length} pairs for ${steps} steps: ` +
      `${first.toFixed(6)} -> ${last.toFixed(6)}`,
  );
  return last < first ? 0 : 1;
}

function main(): number {
  const [, , command, ...rest] = process.argv;
  if (command === "check") {
    return runCheck(rest);
  }
  if (command === "toy") {
    return runToy(rest);
  }
  usage();
}

process.exit(main());
