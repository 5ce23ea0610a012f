/**
 * Hierarchical point-cloud feature extractor.
 *
 * Three chained extraction units, each: farthest-point sample K centers,
 * group G neighbors per center, run a shared three-layer perceptron over
 * every grouped point (activation between layers), max-pool within each
 * group, and carry the center position next to the pooled feature. The last
 * stage has a single key point, so its output is a global descriptor that is
 * concatenated with the manual features (observed bbox + camera positions).
 *
 * Sampling/grouping indices are pure functions of the (canonically ordered)
 * point set and are memoized per observation; gradients flow only through
 * the perceptrons.
 */

import { Tensor, concatCols, gatherRows, maxPoolGroups } from "./autodiff.js";
import { Activation, Dense, applyActivation } from "./nn.js";
import { PlanCache, Points, SamplingPlan, StageConfig } from "./pointops.js";
import { Rng } from "./rng.js";

export interface ExtractorConfig {
  stages: StageConfig[];
  activation: Activation;
}

export const DEFAULT_EXTRACTOR: ExtractorConfig = {
  stages: [
    { k: 256, g: 32, channels: 64 },
    { k: 64, g: 16, channels: 128 },
    { k: 1, g: 64, channels: 256 },
  ],
  activation: "relu",
};

export class ExtractionUnit {
  layers: [Dense, Dense, Dense];

  constructor(inChannels: number, public stage: StageConfig, rng: Rng,
              public activation: Activation) {
    const c = stage.channels;
    this.layers = [new Dense(3 + inChannels, c, rng), new Dense(c, c, rng), new Dense(c, c, rng)];
  }

  /**
   * pts: [n, 3] stage input positions (constants); feats: [n, C] or null.
   * Returns center positions [k, 3] (constant) and pooled features [k, C'].
   */
  forward(
    pts: Points,
    feats: Tensor | null,
    indices: { centers: Int32Array; groups: Int32Array },
  ): { pts: Points; feats: Tensor } {
    const { k, g } = this.stage;
    const rel = new Tensor(k * g, 3);
    for (let c = 0; c < k; c++) {
      const ci = indices.centers[c] * 3;
      for (let j = 0; j < g; j++) {
        const pi = indices.groups[c * g + j] * 3;
        const o = (c * g + j) * 3;
        rel.data[o] = pts[pi] - pts[ci];
        rel.data[o + 1] = pts[pi + 1] - pts[ci + 1];
        rel.data[o + 2] = pts[pi + 2] - pts[ci + 2];
      }
    }
    let x: Tensor = rel;
    if (feats) x = concatCols(rel, gatherRows(feats, indices.groups));
    let h = applyActivation(this.layers[0].forward(x), this.activation);
    h = applyActivation(this.layers[1].forward(h), this.activation);
    h = this.layers[2].forward(h);
    const pooled = maxPoolGroups(h, g);
    const centerPts = new Float64Array(k * 3);
    for (let c = 0; c < k; c++)
      centerPts.set(pts.subarray(indices.centers[c] * 3, indices.centers[c] * 3 + 3), c * 3);
    return { pts: centerPts, feats: pooled };
  }

  get params(): Tensor[] {
    return this.layers.flatMap((l) => l.params);
  }
}

export class FeatureExtractor {
  units: ExtractionUnit[];
  cache: PlanCache;
  emptyObservations = 0;

  constructor(public config: ExtractorConfig, rng: Rng) {
    const stages = config.stages;
    if (stages.length === 0) throw new Error("extractor needs at least one stage");
    if (stages[stages.length - 1].k !== 1)
      throw new Error("final stage must keep a single key point");
    for (let i = 1; i < stages.length; i++)
      if (stages[i].k > stages[i - 1].k)
        throw new Error("key-point counts must be non-increasing across stages");
    this.units = [];
    let c = 0;
    for (const stage of stages) {
      this.units.push(new ExtractionUnit(c, stage, rng, config.activation));
      c = stage.channels;
    }
    this.cache = new PlanCache(stages);
  }

  get outputDim(): number {
    return 3 + this.config.stages[this.config.stages.length - 1].channels;
  }

  /** Global descriptor [1, 3 + C_last]; `manual` is appended by the caller. */
  forwardPoints(ptsRaw: Points): Tensor {
    let pts = ptsRaw;
    if (pts.length === 0) {
      // pathological first frame: stand in a single zero point
      this.emptyObservations += 1;
      pts = new Float64Array(3);
    }
    const plan: SamplingPlan = this.cache.get(pts);
    let ordered = new Float64Array(plan.order.length * 3);
    for (let i = 0; i < plan.order.length; i++)
      ordered.set(pts.subarray(plan.order[i] * 3, plan.order[i] * 3 + 3), i * 3);
    let cur: { pts: Points; feats: Tensor | null } = { pts: ordered, feats: null };
    for (let s = 0; s < this.units.length; s++)
      cur = this.units[s].forward(cur.pts, cur.feats, plan.stages[s]);
    const posRow = new Tensor(1, 3, Float64Array.from(cur.pts.subarray(0, 3)));
    return concatCols(posRow, cur.feats!);
  }

  /** Full observation feature: extractor output plus manual features. */
  forward(ptsRaw: Points, manual: ArrayLike<number>): Tensor {
    const manualRow = new Tensor(1, manual.length, Float64Array.from(manual as number[]));
    return concatCols(this.forwardPoints(ptsRaw), manualRow);
  }

  get params(): Tensor[] {
    return this.units.flatMap((u) => u.params);
  }
}

/** Manual feature vector: observed bbox (6) + flat camera positions (3k). */
export function manualFeatures(
  bboxMin: number[] | null,
  bboxMax: number[] | null,
  cameras: number[],
): number[] {
  const bmin = bboxMin ?? [0, 0, 0];
  const bmax = bboxMax ?? [0, 0, 0];
  return [...bmin, ...bmax, ...cameras];
}
