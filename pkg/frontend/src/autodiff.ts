/**
 * Minimal reverse-mode autodiff over float64 matrices.
 *
 * Everything is a row-major 2D tensor. A forward op records a backward
 * closure; calling backward() on a scalar loss walks the graph in reverse
 * topological order. Float64 keeps finite-difference gradient checks honest.
 */

export class Tensor {
  readonly rows: number;
  readonly cols: number;
  readonly data: Float64Array;
  grad: Float64Array | null = null;
  requiresGrad: boolean;
  parents: Tensor[] = [];
  backfn: (() => void) | null = null;

  constructor(rows: number, cols: number, data?: Float64Array, requiresGrad = false) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (data && data.length !== rows * cols) throw new Error("shape/data mismatch");
    this.requiresGrad = requiresGrad;
  }

  static from(values: number[][] | number[], requiresGrad = false): Tensor {
    if (Array.isArray(values[0])) {
      const rows = values.length;
      const cols = (values[0] as number[]).length;
      const t = new Tensor(rows, cols, undefined, requiresGrad);
      for (let i = 0; i < rows; i++)
        for (let j = 0; j < cols; j++) t.data[i * cols + j] = (values as number[][])[i][j];
      return t;
    }
    const flat = values as number[];
    return new Tensor(1, flat.length, Float64Array.from(flat), requiresGrad);
  }

  get size(): number {
    return this.rows * this.cols;
  }

  item(): number {
    if (this.size !== 1) throw new Error("item() needs a scalar tensor");
    return this.data[0];
  }

  ensureGrad(): Float64Array {
    if (!this.grad) this.grad = new Float64Array(this.size);
    return this.grad;
  }

  zeroGrad(): void {
    if (this.grad) this.grad.fill(0);
  }

  /** Detached copy that stops gradient flow. */
  detach(): Tensor {
    return new Tensor(this.rows, this.cols, this.data.slice(), false);
  }
}

function track(out: Tensor, parents: Tensor[], backfn: () => void): Tensor {
  if (parents.some((p) => p.requiresGrad)) {
    out.requiresGrad = true;
    out.parents = parents;
    out.backfn = backfn;
  }
  return out;
}

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) throw new Error(`matmul ${a.rows}x${a.cols} @ ${b.rows}x${b.cols}`);
  const out = new Tensor(a.rows, b.cols);
  const { rows: m, cols: k } = a;
  const n = b.cols;
  for (let i = 0; i < m; i++) {
    const ai = i * k;
    const oi = i * n;
    for (let p = 0; p < k; p++) {
      const av = a.data[ai + p];
      if (av === 0) continue;
      const bp = p * n;
      for (let j = 0; j < n; j++) out.data[oi + j] += av * b.data[bp + j];
    }
  }
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < m; i++)
        for (let p = 0; p < k; p++) {
          let s = 0;
          const bp = p * n;
          const oi = i * n;
          for (let j = 0; j < n; j++) s += g[oi + j] * b.data[bp + j];
          ga[i * k + p] += s;
        }
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let p = 0; p < k; p++)
        for (let j = 0; j < n; j++) {
          let s = 0;
          for (let i = 0; i < m; i++) s += a.data[i * k + p] * g[i * n + j];
          gb[p * n + j] += s;
        }
    }
  });
}

function sameShape(a: Tensor, b: Tensor, op: string): void {
  if (a.rows !== b.rows || a.cols !== b.cols)
    throw new Error(`${op}: ${a.rows}x${a.cols} vs ${b.rows}x${b.cols}`);
}

export function add(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "add");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] + b.data[i];
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] += g[i];
    }
  });
}

export function sub(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "sub");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] - b.data[i];
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] -= g[i];
    }
  });
}

export function mul(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "mul");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] * b.data[i];
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i] * b.data[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] += g[i] * a.data[i];
    }
  });
}

/** Add a [1, n] bias row to every row of x. */
export function addBias(x: Tensor, bias: Tensor): Tensor {
  if (bias.rows !== 1 || bias.cols !== x.cols) throw new Error("addBias shape");
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.rows; i++)
    for (let j = 0; j < x.cols; j++) out.data[i * x.cols + j] = x.data[i * x.cols + j] + bias.data[j];
  return track(out, [x, bias], () => {
    const g = out.grad!;
    if (x.requiresGrad) {
      const gx = x.ensureGrad();
      for (let i = 0; i < g.length; i++) gx[i] += g[i];
    }
    if (bias.requiresGrad) {
      const gb = bias.ensureGrad();
      for (let i = 0; i < x.rows; i++)
        for (let j = 0; j < x.cols; j++) gb[j] += g[i * x.cols + j];
    }
  });
}

export function scale(x: Tensor, s: number): Tensor {
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) out.data[i] = x.data[i] * s;
  return track(out, [x], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < g.length; i++) gx[i] += g[i] * s;
  });
}

export function addScalar(x: Tensor, s: number): Tensor {
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) out.data[i] = x.data[i] + s;
  return track(out, [x], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < g.length; i++) gx[i] += g[i];
  });
}

function unary(x: Tensor, f: (v: number) => number, df: (v: number, y: number) => number): Tensor {
  const out = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) out.data[i] = f(x.data[i]);
  return track(out, [x], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < g.length; i++) gx[i] += g[i] * df(x.data[i], out.data[i]);
  });
}

export const relu = (x: Tensor) => unary(x, (v) => (v > 0 ? v : 0), (v) => (v > 0 ? 1 : 0));
export const tanh = (x: Tensor) => unary(x, Math.tanh, (_v, y) => 1 - y * y);
export const exp = (x: Tensor) => unary(x, Math.exp, (_v, y) => y);
export const log = (x: Tensor) => unary(x, Math.log, (v) => 1 / v);
export const neg = (x: Tensor) => scale(x, -1);
export const square = (x: Tensor) => unary(x, (v) => v * v, (v) => 2 * v);

/** Clamp with straight-through gradient inside the range, zero outside. */
export function clamp(x: Tensor, lo: number, hi: number): Tensor {
  return unary(
    x,
    (v) => Math.min(hi, Math.max(lo, v)),
    (v) => (v > lo && v < hi ? 1 : 0),
  );
}

/** Elementwise minimum with gradient routed to the smaller input. */
export function minElem(a: Tensor, b: Tensor): Tensor {
  sameShape(a, b, "minElem");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = Math.min(a.data[i], b.data[i]);
  return track(out, [a, b], () => {
    const g = out.grad!;
    for (let i = 0; i < g.length; i++) {
      if (a.data[i] <= b.data[i]) {
        if (a.requiresGrad) a.ensureGrad()[i] += g[i];
      } else if (b.requiresGrad) b.ensureGrad()[i] += g[i];
    }
  });
}

/** Select rows of x by index (repeats allowed); backward scatter-adds. */
export function gatherRows(x: Tensor, idx: ArrayLike<number>): Tensor {
  const out = new Tensor(idx.length, x.cols);
  for (let i = 0; i < idx.length; i++)
    out.data.set(x.data.subarray(idx[i] * x.cols, (idx[i] + 1) * x.cols), i * x.cols);
  return track(out, [x], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < idx.length; i++) {
      const src = i * x.cols;
      const dst = idx[i] * x.cols;
      for (let j = 0; j < x.cols; j++) gx[dst + j] += g[src + j];
    }
  });
}

export function concatCols(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows) throw new Error("concatCols rows");
  const out = new Tensor(a.rows, a.cols + b.cols);
  for (let i = 0; i < a.rows; i++) {
    out.data.set(a.data.subarray(i * a.cols, (i + 1) * a.cols), i * out.cols);
    out.data.set(b.data.subarray(i * b.cols, (i + 1) * b.cols), i * out.cols + a.cols);
  }
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++)
        for (let j = 0; j < a.cols; j++) ga[i * a.cols + j] += g[i * out.cols + j];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < a.rows; i++)
        for (let j = 0; j < b.cols; j++) gb[i * b.cols + j] += g[i * out.cols + a.cols + j];
    }
  });
}

/**
 * Max over consecutive row groups: x is [G*g, C], result [G, C] holds the
 * per-group maximum of each channel (ties go to the first row).
 */
export function maxPoolGroups(x: Tensor, groupSize: number): Tensor {
  if (x.rows % groupSize !== 0) throw new Error("maxPoolGroups divisibility");
  const groups = x.rows / groupSize;
  const out = new Tensor(groups, x.cols);
  const argmax = new Int32Array(groups * x.cols);
  for (let gI = 0; gI < groups; gI++) {
    for (let j = 0; j < x.cols; j++) {
      let best = -Infinity;
      let bestRow = gI * groupSize;
      for (let r = gI * groupSize; r < (gI + 1) * groupSize; r++) {
        const v = x.data[r * x.cols + j];
        if (v > best) {
          best = v;
          bestRow = r;
        }
      }
      out.data[gI * x.cols + j] = best;
      argmax[gI * x.cols + j] = bestRow;
    }
  }
  return track(out, [x], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < g.length; i++) {
      const j = i % x.cols;
      gx[argmax[i] * x.cols + j] += g[i];
    }
  });
}

/** Sum across columns: [m, n] -> [m, 1]. */
export function sumCols(x: Tensor): Tensor {
  const out = new Tensor(x.rows, 1);
  for (let i = 0; i < x.rows; i++) {
    let s = 0;
    for (let j = 0; j < x.cols; j++) s += x.data[i * x.cols + j];
    out.data[i] = s;
  }
  return track(out, [x], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < x.rows; i++)
      for (let j = 0; j < x.cols; j++) gx[i * x.cols + j] += g[i];
  });
}

export function meanAll(x: Tensor): Tensor {
  const out = new Tensor(1, 1);
  let s = 0;
  for (let i = 0; i < x.size; i++) s += x.data[i];
  out.data[0] = s / x.size;
  return track(out, [x], () => {
    const g = out.grad![0] / x.size;
    const gx = x.ensureGrad();
    for (let i = 0; i < x.size; i++) gx[i] += g;
  });
}

export function sumAll(x: Tensor): Tensor {
  const out = new Tensor(1, 1);
  let s = 0;
  for (let i = 0; i < x.size; i++) s += x.data[i];
  out.data[0] = s;
  return track(out, [x], () => {
    const g = out.grad![0];
    const gx = x.ensureGrad();
    for (let i = 0; i < x.size; i++) gx[i] += g;
  });
}

/** Reverse-topological backward pass from a scalar loss. */
export function backward(loss: Tensor): void {
  if (loss.size !== 1) throw new Error("backward needs a scalar loss");
  const topo: Tensor[] = [];
  const seen = new Set<Tensor>();
  const stack: Array<[Tensor, boolean]> = [[loss, false]];
  while (stack.length) {
    const [node, processed] = stack.pop()!;
    if (processed) {
      topo.push(node);
      continue;
    }
    if (seen.has(node)) continue;
    seen.add(node);
    stack.push([node, true]);
    for (const p of node.parents) if (!seen.has(p)) stack.push([p, false]);
  }
  loss.ensureGrad()[0] = 1;
  for (let i = topo.length - 1; i >= 0; i--) {
    const node = topo[i];
    if (node.backfn && node.grad) node.backfn();
  }
}

/** Adam over a fixed parameter list. step() consumes and clears gradients. */
export class Adam {
  private m: Float64Array[];
  private v: Float64Array[];
  private t = 0;

  constructor(
    public params: Tensor[],
    public lr = 3e-4,
    public beta1 = 0.9,
    public beta2 = 0.999,
    public eps = 1e-8,
  ) {
    this.m = params.map((p) => new Float64Array(p.size));
    this.v = params.map((p) => new Float64Array(p.size));
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let k = 0; k < this.params.length; k++) {
      const p = this.params[k];
      if (!p.grad) continue;
      const m = this.m[k];
      const v = this.v[k];
      for (let i = 0; i < p.size; i++) {
        const g = p.grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        p.data[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
      p.grad.fill(0);
    }
  }
}

export function zeroGrads(params: Tensor[]): void {
  for (const p of params) p.zeroGrad();
}
