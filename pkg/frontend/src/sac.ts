/**
 * Soft actor-critic over extracted point-cloud features.
 *
 * Twin critics with polyak-averaged targets, a squashed-Gaussian actor, and
 * a fixed entropy coefficient. The feature extractor is shared and trained
 * by the critic loss; the actor consumes detached features.
 */

import {
  Adam,
  Tensor,
  add as addT,
  addScalar,
  backward,
  clamp,
  concatCols,
  exp,
  log,
  meanAll,
  minElem,
  mul,
  neg,
  scale,
  square,
  sub,
  sumCols,
  tanh,
  zeroGrads,
} from "./autodiff.js";
import { FeatureExtractor } from "./extractor.js";
import { Mlp, polyak, stackRows } from "./nn.js";
import { Points } from "./pointops.js";
import { Rng } from "./rng.js";

const LOG_STD_MIN = -5;
const LOG_STD_MAX = 2;
const LOG_2PI = Math.log(2 * Math.PI);

export interface SacConfig {
  actionDim: number;
  maxAction: number;
  hidden: number;
  gamma: number;
  tau: number;
  alpha: number;
  lr: number;
  batchSize: number;
  bufferSize: number;
  seed: number;
}

export const DEFAULT_SAC: Omit<SacConfig, "actionDim" | "maxAction"> = {
  hidden: 64,
  gamma: 0.9,
  tau: 0.01,
  alpha: 0.02,
  lr: 1e-3,
  batchSize: 32,
  bufferSize: 25000,
  seed: 0,
};

export interface Transition {
  pts: Points;
  manual: number[];
  action: Float64Array;
  reward: number;
  nextPts: Points;
  nextManual: number[];
  done: boolean;
}

export class ReplayBuffer {
  private store: Transition[] = [];
  private head = 0;

  constructor(public capacity: number, private rng: Rng) {}

  get size(): number {
    return this.store.length;
  }

  push(t: Transition): void {
    if (this.store.length < this.capacity) this.store.push(t);
    else {
      this.store[this.head] = t;
      this.head = (this.head + 1) % this.capacity;
    }
  }

  sample(n: number): Transition[] {
    const out: Transition[] = [];
    for (let i = 0; i < n; i++) out.push(this.store[this.rng.int(this.store.length)]);
    return out;
  }
}

interface PolicyOut {
  action: Tensor; // [n, actionDim], squashed to +-maxAction
  logProb: Tensor; // [n, 1]
}

export class SacAgent {
  actor: Mlp;
  critic1: Mlp;
  critic2: Mlp;
  target1: Mlp;
  target2: Mlp;
  actorOpt: Adam;
  criticOpt: Adam;
  replay: ReplayBuffer;
  rng: Rng;
  updates = 0;

  constructor(public extractor: FeatureExtractor, public featDim: number,
              public cfg: SacConfig) {
    this.rng = new Rng(cfg.seed ^ 0x5ac5ac);
    const h = cfg.hidden;
    this.actor = new Mlp([featDim, h, h, 2 * cfg.actionDim], this.rng);
    this.critic1 = new Mlp([featDim + cfg.actionDim, h, h, 1], this.rng);
    this.critic2 = new Mlp([featDim + cfg.actionDim, h, h, 1], this.rng);
    this.target1 = new Mlp([featDim + cfg.actionDim, h, h, 1], this.rng);
    this.target2 = new Mlp([featDim + cfg.actionDim, h, h, 1], this.rng);
    for (let k = 0; k < this.critic1.params.length; k++) {
      this.target1.params[k].data.set(this.critic1.params[k].data);
      this.target2.params[k].data.set(this.critic2.params[k].data);
    }
    for (const p of [...this.target1.params, ...this.target2.params]) p.requiresGrad = false;
    this.actorOpt = new Adam(this.actor.params, cfg.lr);
    this.criticOpt = new Adam([...this.critic1.params, ...this.critic2.params,
                               ...extractor.params], cfg.lr);
    this.replay = new ReplayBuffer(cfg.bufferSize, new Rng(cfg.seed ^ 0xbeef));
  }

  private policy(features: Tensor, noise: Float64Array | null): PolicyOut {
    const out = this.actor.forward(features);
    const d = this.cfg.actionDim;
    const n = out.rows;
    const mean = sliceCols(out, 0, d);
    const logStd = clamp(sliceCols(out, d, 2 * d), LOG_STD_MIN, LOG_STD_MAX);
    const std = exp(logStd);
    let raw: Tensor;
    let xi: Tensor | null = null;
    if (noise) {
      xi = new Tensor(n, d, noise);
      raw = addT(mean, mul(std, xi));
    } else {
      raw = mean; // deterministic head
    }
    const squashed = tanh(raw);
    const action = scale(squashed, this.cfg.maxAction);
    // log pi = sum_i [ -0.5 xi^2 - log std - 0.5 log 2pi
    //                  - log(1 - tanh^2 + eps) - log maxAction ]
    let logProb: Tensor;
    if (xi) {
      const gaussian = addScalar(
        neg(addT(scale(square(xi), 0.5), logStd)),
        -0.5 * LOG_2PI,
      );
      const correction = log(addScalar(neg(square(squashed)), 1 + 1e-6));
      const perDim = sub(gaussian, correction);
      logProb = addScalar(sumCols(perDim), -d * Math.log(this.cfg.maxAction));
    } else {
      logProb = new Tensor(n, 1);
    }
    return { action, logProb };
  }

  /** Stochastic action for environment interaction (no gradients kept). */
  act(features: Tensor): Float64Array {
    const noise = new Float64Array(this.cfg.actionDim);
    for (let i = 0; i < noise.length; i++) noise[i] = this.rng.normal();
    const { action } = this.policy(features.detach(), noise);
    return Float64Array.from(action.data);
  }

  /** Mean action (deterministic evaluation). */
  actDeterministic(features: Tensor): Float64Array {
    const { action } = this.policy(features.detach(), null);
    return Float64Array.from(action.data);
  }

  uniformAction(): Float64Array {
    const a = new Float64Array(this.cfg.actionDim);
    for (let i = 0; i < a.length; i++) a[i] = this.rng.uniform(-this.cfg.maxAction, this.cfg.maxAction);
    return a;
  }

  private allParams(): Tensor[] {
    return [...this.actor.params, ...this.critic1.params, ...this.critic2.params,
            ...this.extractor.params];
  }

  /** One gradient update on a replay batch. Returns loss diagnostics. */
  update(): { criticLoss: number; actorLoss: number } | null {
    if (this.replay.size < this.cfg.batchSize) return null;
    const batch = this.replay.sample(this.cfg.batchSize);
    const n = batch.length;
    const d = this.cfg.actionDim;

    const featRows = batch.map((t) => this.extractor.forward(t.pts, t.manual));
    const feat = stackRows(featRows);
    const nextFeatRows = batch.map((t) =>
      this.extractor.forward(t.nextPts, t.nextManual).detach(),
    );
    const nextFeat = stackRows(nextFeatRows);

    // targets: r + gamma (1 - done) (min target Q(s', a') - alpha log pi(a'|s'))
    const noise = new Float64Array(n * d);
    for (let i = 0; i < noise.length; i++) noise[i] = this.rng.normal();
    const nextPolicy = this.policy(nextFeat, noise);
    const nextIn = concatCols(nextFeat, nextPolicy.action.detach());
    const q1t = this.target1.forward(nextIn);
    const q2t = this.target2.forward(nextIn);
    const targets = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      const qmin = Math.min(q1t.data[i], q2t.data[i]);
      const soft = qmin - this.cfg.alpha * nextPolicy.logProb.data[i];
      targets[i] = batch[i].reward + (batch[i].done ? 0 : this.cfg.gamma * soft);
    }

    // critic + extractor update
    zeroGrads(this.allParams());
    const actions = new Tensor(n, d);
    for (let i = 0; i < n; i++) actions.data.set(batch[i].action, i * d);
    const qIn = concatCols(feat, actions);
    const q1 = this.critic1.forward(qIn);
    const q2 = this.critic2.forward(qIn);
    const targetT = new Tensor(n, 1, targets.slice());
    const criticLoss = meanAll(
      addT(square(sub(q1, targetT)), square(sub(q2, targetT))),
    );
    backward(criticLoss);
    this.criticOpt.step();

    // actor update on detached features
    zeroGrads(this.allParams());
    const featD = feat.detach();
    const noise2 = new Float64Array(n * d);
    for (let i = 0; i < noise2.length; i++) noise2[i] = this.rng.normal();
    const pi = this.policy(featD, noise2);
    const piIn = concatCols(featD, pi.action);
    const qPi = minElem(this.critic1.forward(piIn), this.critic2.forward(piIn));
    const actorLoss = meanAll(sub(scale(pi.logProb, this.cfg.alpha), qPi));
    backward(actorLoss);
    this.actorOpt.step();

    polyak(this.target1.params, this.critic1.params, this.cfg.tau);
    polyak(this.target2.params, this.critic2.params, this.cfg.tau);
    this.updates += 1;
    return { criticLoss: criticLoss.item(), actorLoss: actorLoss.item() };
  }
}

/** Column slice [m, from:to) as a tracked op. */
export function sliceCols(x: Tensor, from: number, to: number): Tensor {
  const w = to - from;
  const out = new Tensor(x.rows, w);
  for (let i = 0; i < x.rows; i++)
    out.data.set(x.data.subarray(i * x.cols + from, i * x.cols + to), i * w);
  if (x.requiresGrad) {
    out.requiresGrad = true;
    out.parents = [x];
    out.backfn = () => {
      const g = out.grad!;
      const gx = x.ensureGrad();
      for (let i = 0; i < x.rows; i++)
        for (let j = 0; j < w; j++) gx[i * x.cols + from + j] += g[i * w + j];
    };
  }
  return out;
}
