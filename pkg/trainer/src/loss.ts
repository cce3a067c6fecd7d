/**
 * The hybrid preference loss, mirroring the producer side exactly:
 * a -log sigmoid preference term on beta-scaled policy-vs-reference
 * log-ratios plus a length-normalized NLL term on the chosen sequence.
 */

export interface LossConfig {
  alphaNll: number;
  beta: number;
}

export const DEFAULT_LOSS_CONFIG: LossConfig = { alphaNll: 1.0, beta: 0.1 };

export interface LossInputs {
  policyLogpChosen: number;
  policyLogpRejected: number;
  refLogpChosen: number;
  refLogpRejected: number;
  chosenTokenCount: number;
}

/** log(1 + e^x) without overflow for large |x|. */
export function softplus(x: number): number {
  return x > 0 ? x + Math.log1p(Math.exp(-x)) : Math.log1p(Math.exp(x));
}

export function sigmoid(x: number): number {
  if (x >= 0) {
    return 1 / (1 + Math.exp(-x));
  }
  const t = Math.exp(x);
  return t / (1 + t);
}

export function preferenceMargin(inputs: LossInputs, cfg: LossConfig): number {
  const chosenRatio = inputs.policyLogpChosen - inputs.refLogpChosen;
  const rejectedRatio = inputs.policyLogpRejected - inputs.refLogpRejected;
  return cfg.beta * (chosenRatio - rejectedRatio);
}

export function dpoLoss(inputs: LossInputs, cfg: LossConfig): number {
  return softplus(-preferenceMargin(inputs, cfg));
}

export function nllLoss(inputs: LossInputs): number {
  if (inputs.chosenTokenCount < 1) {
    throw new Error("chosenTokenCount must be >= 1");
  }
  return -inputs.policyLogpChosen / inputs.chosenTokenCount;
}

export function totalLoss(inputs: LossInputs, cfg: LossConfig): number {
  return dpoLoss(inputs, cfg) + cfg.alphaNll * nllLoss(inputs);
}
