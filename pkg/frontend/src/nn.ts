/** Dense layers, MLP stacks, and row stacking shared by the extractor and SAC. */

import { Adam, Tensor, addBias, matmul, relu, tanh } from "./autodiff.js";
import { Rng } from "./rng.js";

export type Activation = "relu" | "tanh";

export function applyActivation(x: Tensor, act: Activation): Tensor {
  return act === "relu" ? relu(x) : tanh(x);
}

export class Dense {
  w: Tensor;
  b: Tensor;

  constructor(inDim: number, outDim: number, rng: Rng) {
    const std = Math.sqrt(2 / (inDim + outDim));
    this.w = new Tensor(inDim, outDim, undefined, true);
    for (let i = 0; i < this.w.size; i++) this.w.data[i] = rng.normal() * std;
    this.b = new Tensor(1, outDim, undefined, true);
  }

  forward(x: Tensor): Tensor {
    return addBias(matmul(x, this.w), this.b);
  }

  get params(): Tensor[] {
    return [this.w, this.b];
  }
}

/** Hidden layers with activation, final layer linear. */
export class Mlp {
  layers: Dense[];

  constructor(dims: number[], rng: Rng, public activation: Activation = "relu") {
    this.layers = [];
    for (let i = 0; i + 1 < dims.length; i++) this.layers.push(new Dense(dims[i], dims[i + 1], rng));
  }

  forward(x: Tensor): Tensor {
    let h = x;
    for (let i = 0; i < this.layers.length; i++) {
      h = this.layers[i].forward(h);
      if (i + 1 < this.layers.length) h = applyActivation(h, this.activation);
    }
    return h;
  }

  get params(): Tensor[] {
    return this.layers.flatMap((l) => l.params);
  }
}

/** Stack [1, d] rows from independent graphs into one [n, d] tensor. */
export function stackRows(rows: Tensor[]): Tensor {
  const cols = rows[0].cols;
  const out = new Tensor(rows.length, cols);
  for (let i = 0; i < rows.length; i++) {
    if (rows[i].cols !== cols || rows[i].rows !== 1) throw new Error("stackRows shape");
    out.data.set(rows[i].data, i * cols);
  }
  out.parents = rows.filter((r) => r.requiresGrad);
  if (out.parents.length) {
    out.requiresGrad = true;
    out.backfn = () => {
      const g = out.grad!;
      for (let i = 0; i < rows.length; i++) {
        if (!rows[i].requiresGrad) continue;
        const gr = rows[i].ensureGrad();
        for (let j = 0; j < cols; j++) gr[j] += g[i * cols + j];
      }
    };
  }
  return out;
}

export function polyak(target: Tensor[], source: Tensor[], tau: number): void {
  for (let k = 0; k < target.length; k++) {
    const t = target[k].data;
    const s = source[k].data;
    for (let i = 0; i < t.length; i++) t[i] = (1 - tau) * t[i] + tau * s[i];
  }
}

export function copyParams(target: Tensor[], source: Tensor[]): void {
  for (let k = 0; k < target.length; k++) target[k].data.set(source[k].data);
}

export function serializeParams(params: Tensor[]): number[][] {
  return params.map((p) => Array.from(p.data));
}

export function loadParams(params: Tensor[], blob: number[][]): void {
  for (let k = 0; k < params.length; k++) {
    if (blob[k].length !== params[k].size) throw new Error("checkpoint shape mismatch");
    params[k].data.set(blob[k]);
  }
}

export { Adam };
