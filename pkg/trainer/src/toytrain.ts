/**
 * A toy trainer over the pair contract: a single softmax table scores
 * token sequences, and full-batch gradient descent on the hybrid loss
 * pushes chosen sequences up and rejected ones down. Tokenization is
 * owned here (hash into a small vocabulary); the producer never sees it.
 */

import { DEFAULT_LOSS_CONFIG, LossConfig, LossInputs, sigmoid, totalLoss } from "./loss.js";
import { PairRecord } from "./pairs.js";

export const VOCAB_SIZE = 64;

/** FNV-1a, folded into the vocabulary range. */
export function tokenSlot(word: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < word.length; i++) {
    hash ^= word.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return (hash >>> 0) % VOCAB_SIZE;
}

export function tokenize(text: string): number[] {
  const words = text.split(/\s+/).filter((w) => w.length > 0);
  if (words.length === 0) {
    return [0];
  }
  return words.map(tokenSlot);
}

export class SoftmaxModel {
  logits: Float64Array;

  constructor(logits?: Float64Array) {
    this.logits = logits ? Float64Array.from(logits) : new Float64Array(VOCAB_SIZE);
  }

  clone(): SoftmaxModel {
    return new SoftmaxModel(this.logits);
  }

  logProbs(): Float64Array {
    let max = -Infinity;
    for (const v of this.logits) {
      max = Math.max(max, v);
    }
    let sum = 0;
    for (const v of this.logits) {
      sum += Math.exp(v - max);
    }
    const logZ = max + Math.log(sum);
    return Float64Array.from(this.logits, (v) => v - logZ);
  }

  probs(): Float64Array {
    return Float64Array.from(this.logProbs(), Math.exp);
  }

  sequenceLogProb(tokens: number[]): number {
    const logProbs = this.logProbs();
    let total = 0;
    for (const token of tokens) {
      total += logProbs[token];
    }
    return total;
  }
}

interface TrainExample {
  chosenTokens: number[];
  rejectedTokens: number[];
  refLogpChosen: number;
  refLogpRejected: number;
}

function sideText(side: { reasoning: string; answer: string }): string {
  return `${side.reasoning} ${side.answer}`;
}

function prepare(records: PairRecord[], reference: SoftmaxModel): TrainExample[] {
  return records.map((record) => {
    const chosenTokens = tokenize(sideText(record.chosen));
    const rejectedTokens = tokenize(sideText(record.rejected));
    return {
      chosenTokens,
      rejectedTokens,
      refLogpChosen: reference.sequenceLogProb(chosenTokens),
      refLogpRejected: reference.sequenceLogProb(rejectedTokens),
    };
  });
}

function exampleInputs(model: SoftmaxModel, example: TrainExample): LossInputs {
  return {
    policyLogpChosen: model.sequenceLogProb(example.chosenTokens),
    policyLogpRejected: model.sequenceLogProb(example.rejectedTokens),
    refLogpChosen: example.refLogpChosen,
    refLogpRejected: example.refLogpRejected,
    chosenTokenCount: example.chosenTokens.length,
  };
}

export function meanLoss(
  model: SoftmaxModel,
  examples: TrainExample[],
  cfg: LossConfig,
): number {
  let total = 0;
  for (const example of examples) {
    total += totalLoss(exampleInputs(model, example), cfg);
  }
  return total / examples.length;
}

function counts(tokens: number[]): Float64Array {
  const table = new Float64Array(VOCAB_SIZE);
  for (const token of tokens) {
    table[token] += 1;
  }
  return table;
}

/** Analytic gradient of the mean loss w.r.t. the logit table. */
export function meanLossGradient(
  model: SoftmaxModel,
  examples: TrainExample[],
  cfg: LossConfig,
): Float64Array {
  const grad = new Float64Array(VOCAB_SIZE);
  const probs = model.probs();
  for (const example of examples) {
    const inputs = exampleInputs(model, example);
    const margin = cfg.beta * (
      inputs.policyLogpChosen - inputs.refLogpChosen
      - (inputs.policyLogpRejected - inputs.refLogpRejected)
    );
    const dChosen = -sigmoid(-margin) * cfg.beta - cfg.alphaNll / inputs.chosenTokenCount;
    const dRejected = sigmoid(-margin) * cfg.beta;
    const chosenCounts = counts(example.chosenTokens);
    const rejectedCounts = counts(example.rejectedTokens);
    for (let v = 0; v < VOCAB_SIZE; v++) {
      grad[v] += dChosen * (chosenCounts[v] - example.chosenTokens.length * probs[v]);
      grad[v] += dRejected * (rejectedCounts[v] - example.rejectedTokens.length * probs[v]);
    }
  }
  for (let v = 0; v < VOCAB_SIZE; v++) {
    grad[v] /= examples.length;
  }
  return grad;
}

/**
 * Full-batch gradient descent; returns the loss trajectory, one value per
 * step plus the initial loss (length steps + 1).
 */
export function toyTrain(
  records: PairRecord[],
  steps: number,
  learningRate: number,
  cfg: LossConfig = DEFAULT_LOSS_CONFIG,
): number[] {
  if (records.length === 0) {
    throw new Error("at least one pair record required");
  }
  const model = new SoftmaxModel();
  const reference = model.clone();
  const examples = prepare(records, reference);
  const trajectory = [meanLoss(model, examples, cfg)];
  for (let step = 0; step < steps; step++) {
    const grad = meanLossGradient(model, examples, cfg);
    for (let v = 0; v < VOCAB_SIZE; v++) {
      model.logits[v] -= learningRate * grad[v];
    }
    trajectory.push(meanLoss(model, examples, cfg));
  }
  return trajectory;
}
