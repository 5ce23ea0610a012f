import { describe, expect, it } from "vitest";

import { Tensor, backward, sumAll, mul } from "../src/autodiff.js";
import { ExtractionUnit, FeatureExtractor, manualFeatures } from "../src/extractor.js";
import { buildSamplingPlan } from "../src/pointops.js";
import { Rng } from "../src/rng.js";

function randomPoints(rng: Rng, n: number, scl = 3): Float64Array {
  const pts = new Float64Array(n * 3);
  for (let i = 0; i < pts.length; i++) pts[i] = rng.uniform(0, scl);
  return pts;
}

function shuffle(pts: Float64Array, seed: number): Float64Array {
  const n = pts.length / 3;
  const perm = new Rng(seed).choice(n, n);
  const out = new Float64Array(pts.length);
  perm.forEach((src, dst) => out.set(pts.subarray(src * 3, src * 3 + 3), dst * 3));
  return out;
}

describe("extraction unit", () => {
  it("pooled features are invariant to point order within groups (K=1, G=N)", () => {
    const rng = new Rng(21);
    const unit = new ExtractionUnit(0, { k: 1, g: 12, channels: 8 }, new Rng(2), "relu");
    const pts = randomPoints(rng, 12);
    const center = Int32Array.from([0]);
    const groupsA = Int32Array.from({ length: 12 }, (_, i) => i);
    const groupsB = Int32Array.from(new Rng(3).choice(12, 12));
    const outA = unit.forward(pts, null, { centers: center, groups: groupsA });
    const outB = unit.forward(pts, null, { centers: center, groups: groupsB });
    for (let i = 0; i < outA.feats.size; i++)
      expect(Math.abs(outA.feats.data[i] - outB.feats.data[i])).toBeLessThan(1e-12);
  });

  it("identical input points give identical pooled features per group", () => {
    const unit = new ExtractionUnit(0, { k: 3, g: 4, channels: 6 }, new Rng(4), "relu");
    const pts = new Float64Array(30).fill(1.5); // 10 identical points
    const centers = Int32Array.from([0, 4, 9]);
    const groups = Int32Array.from(Array(12).fill(0).map((_, i) => i % 10));
    const out = unit.forward(pts, null, { centers, groups });
    for (let c = 1; c < 3; c++)
      for (let j = 0; j < 6; j++)
        expect(out.feats.data[c * 6 + j]).toBeCloseTo(out.feats.data[j], 12);
  });

  it("matches an explicit-loop reference implementation", () => {
    const rng = new Rng(22);
    const stage = { k: 4, g: 5, channels: 7 };
    const unit = new ExtractionUnit(0, stage, new Rng(5), "relu");
    const pts = randomPoints(rng, 20);
    const plan = buildSamplingPlan(pts, [stage]);
    const out = unit.forward(pts, null, plan.stages[0]);

    // reference: per-point MLP with plain loops, then per-group max
    const [l0, l1, l2] = unit.layers;
    const reluV = (v: number) => (v > 0 ? v : 0);
    for (let c = 0; c < stage.k; c++) {
      const expected = new Array(stage.channels).fill(-Infinity);
      for (let j = 0; j < stage.g; j++) {
        const pi = plan.stages[0].groups[c * stage.g + j];
        const ci = plan.stages[0].centers[c];
        const x = [
          pts[pi * 3] - pts[ci * 3],
          pts[pi * 3 + 1] - pts[ci * 3 + 1],
          pts[pi * 3 + 2] - pts[ci * 3 + 2],
        ];
        const h0 = Array.from({ length: stage.channels }, (_, o) => {
          let s = l0.b.data[o];
          for (let k = 0; k < 3; k++) s += x[k] * l0.w.data[k * stage.channels + o];
          return reluV(s);
        });
        const h1 = Array.from({ length: stage.channels }, (_, o) => {
          let s = l1.b.data[o];
          for (let k = 0; k < stage.channels; k++) s += h0[k] * l1.w.data[k * stage.channels + o];
          return reluV(s);
        });
        const h2 = Array.from({ length: stage.channels }, (_, o) => {
          let s = l2.b.data[o];
          for (let k = 0; k < stage.channels; k++) s += h1[k] * l2.w.data[k * stage.channels + o];
          return s;
        });
        for (let o = 0; o < stage.channels; o++) expected[o] = Math.max(expected[o], h2[o]);
      }
      for (let o = 0; o < stage.channels; o++)
        expect(Math.abs(out.feats.data[c * stage.channels + o] - expected[o])).toBeLessThan(1e-5);
    }
  });
});

describe("feature extractor", () => {
  it("output length is 3 + 256 + 6 + 3 * num_cameras with default-style stages", () => {
    const extractor = new FeatureExtractor(
      {
        stages: [
          { k: 256, g: 32, channels: 64 },
          { k: 64, g: 16, channels: 128 },
          { k: 1, g: 64, channels: 256 },
        ],
        activation: "relu",
      },
      new Rng(6),
    );
    const numCameras = 2;
    const pts = randomPoints(new Rng(23), 300);
    const manual = manualFeatures([0, 0, 0], [1, 1, 1], new Array(3 * numCameras).fill(0.5));
    const out = extractor.forward(pts, manual);
    expect(out.cols).toBe(3 + 256 + 6 + 3 * numCameras);
    expect(out.rows).toBe(1);
  });

  it("is permutation stable end to end (canonical ordering)", () => {
    const extractor = new FeatureExtractor(
      {
        stages: [
          { k: 16, g: 8, channels: 16 },
          { k: 4, g: 4, channels: 32 },
          { k: 1, g: 4, channels: 64 },
        ],
        activation: "relu",
      },
      new Rng(7),
    );
    const pts = randomPoints(new Rng(24), 80);
    const manual = [0, 0, 0, 1, 1, 1, 0.5, 0.5, 0.5];
    const a = extractor.forward(pts, manual);
    const b = extractor.forward(shuffle(pts, 99), manual);
    for (let i = 0; i < a.size; i++)
      expect(Math.abs(a.data[i] - b.data[i])).toBeLessThan(1e-5);
  });

  it("distinct rooms give distinct features on a probe set", () => {
    const extractor = new FeatureExtractor(
      { stages: [{ k: 8, g: 4, channels: 8 }, { k: 1, g: 8, channels: 16 }], activation: "relu" },
      new Rng(8),
    );
    const feats: number[][] = [];
    for (let s = 0; s < 10; s++) {
      const pts = randomPoints(new Rng(100 + s), 40, 2 + s * 0.3);
      feats.push(Array.from(extractor.forwardPoints(pts).data));
    }
    for (let i = 0; i < feats.length; i++)
      for (let j = i + 1; j < feats.length; j++) {
        const diff = Math.max(...feats[i].map((v, k) => Math.abs(v - feats[j][k])));
        expect(diff).toBeGreaterThan(1e-6);
      }
  });

  it("empty observation is replaced by a zero point and flagged", () => {
    const extractor = new FeatureExtractor(
      { stages: [{ k: 2, g: 2, channels: 4 }, { k: 1, g: 2, channels: 8 }], activation: "relu" },
      new Rng(9),
    );
    const out = extractor.forward(new Float64Array(0), [0, 0, 0, 0, 0, 0, 1, 1, 1]);
    expect(out.cols).toBe(3 + 8 + 9);
    expect(extractor.emptyObservations).toBe(1);
  });
});

describe("gradient check (acceptance: tiny 2-stage extractor)", () => {
  it("analytic gradients match central finite differences within 1e-4 relative", () => {
    // tanh keeps the loss smooth so central differences are trustworthy
    const extractor = new FeatureExtractor(
      { stages: [{ k: 4, g: 3, channels: 6 }, { k: 1, g: 4, channels: 8 }], activation: "tanh" },
      new Rng(10),
    );
    const pts = randomPoints(new Rng(25), 12);
    const weights = new Tensor(1, extractor.outputDim);
    const wr = new Rng(26);
    for (let i = 0; i < weights.size; i++) weights.data[i] = wr.normal();

    const loss = () => sumAll(mul(extractor.forwardPoints(pts), weights));
    for (const p of extractor.params) p.zeroGrad();
    backward(loss());

    let checked = 0;
    for (const p of extractor.params) {
      const stride = Math.max(1, Math.floor(p.size / 8));
      for (let i = 0; i < p.size; i += stride) {
        const orig = p.data[i];
        const h = 1e-5 * Math.max(1, Math.abs(orig));
        p.data[i] = orig + h;
        const up = loss().item();
        p.data[i] = orig - h;
        const dn = loss().item();
        p.data[i] = orig;
        const numeric = (up - dn) / (2 * h);
        const analytic = p.grad ? p.grad[i] : 0;
        const rel = Math.abs(numeric - analytic) / Math.max(1e-8, Math.abs(numeric), Math.abs(analytic));
        expect(rel).toBeLessThan(1e-4);
        checked += 1;
      }
    }
    expect(checked).toBeGreaterThan(50);
    console.log(`ACCEPTANCE PASS: extractor-gradient-check (${checked} weights within 1e-4)`);
  });
});

describe("extractor config validation", () => {
  it("rejects a final stage with more than one key point", () => {
    expect(
      () => new FeatureExtractor(
        { stages: [{ k: 4, g: 2, channels: 4 }], activation: "relu" }, new Rng(1)),
    ).toThrow(/single key point/);
  });

  it("rejects increasing key-point counts", () => {
    expect(
      () => new FeatureExtractor(
        {
          stages: [
            { k: 2, g: 2, channels: 4 },
            { k: 8, g: 2, channels: 4 },
            { k: 1, g: 2, channels: 4 },
          ],
          activation: "relu",
        },
        new Rng(1)),
    ).toThrow(/non-increasing/);
  });
});
