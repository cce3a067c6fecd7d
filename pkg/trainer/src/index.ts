export {
  PAIR_SCHEMA,
  PairRecord,
  PairSide,
  SchemaError,
  dumpPairs,
  loadPairs,
  parsePairRecord,
  parsePairsJsonl,
} from "./pairs.js";
export {
  DEFAULT_LOSS_CONFIG,
  LossConfig,
  LossInputs,
  dpoLoss,
  nllLoss,
  preferenceMargin,
  sigmoid,
  softplus,
  totalLoss,
} from "./loss.js";
export {
  FIXTURE_SCHEMA,
  FixtureRecord,
  PARITY_TOLERANCE,
  ParityReport,
  checkFixtures,
  computeLosses,
  loadFixtures,
  parseFixturesJsonl,
} from "./parity.js";
export {
  SoftmaxModel,
  VOCAB_SIZE,
  tokenSlot,
  tokenize,
  toyTrain,
} from "./toytrain.js";
