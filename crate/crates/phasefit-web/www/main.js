// Demo page logic: drives the wasm module built by `wasm-pack build --target web`.
// No frameworks; two canvases are redrawn from plain JSON state.

import init, { synthesize, Inference } from "./pkg/phasefit_web.js";

const $ = (id) => document.getElementById(id);
const status = (text) => { $("status").textContent = text; };

let sample = null;      // parsed SyntheticSample
let inference = null;   // wasm Inference handle
let running = false;

const INK = "#e6ebf0";
const DIM = "#8a97a5";
const ACCENT = "#56b6f0";
const TRUTH = "#e0a34d";

// --- tiny plotting helpers ------------------------------------------------

function frame(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#313b46";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
}

function axisLabel(ctx, text, x, y, angle = 0) {
  ctx.save();
  ctx.translate(x, y);
  ctx.rotate(angle);
  ctx.fillStyle = DIM;
  ctx.font = "12px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(text, 0, 0);
  ctx.restore();
}

function ticks(ctx, pad, w, h, xr, yr, fmtX, fmtY) {
  ctx.fillStyle = DIM;
  ctx.font = "11px system-ui, sans-serif";
  for (let i = 0; i <= 4; i++) {
    const fx = xr[0] + (i / 4) * (xr[1] - xr[0]);
    const px = pad.l + (i / 4) * (w - pad.l - pad.r);
    ctx.textAlign = "center";
    ctx.fillText(fmtX(fx), px, h - pad.b + 16);
    const fy = yr[0] + (i / 4) * (yr[1] - yr[0]);
    const py = h - pad.b - (i / 4) * (h - pad.t - pad.b);
    ctx.textAlign = "right";
    ctx.fillText(fmtY(fy), pad.l - 6, py + 4);
  }
}

// --- scatter panel ----------------------------------------------------------

function drawScatter() {
  const canvas = $("scatter");
  const ctx = canvas.getContext("2d");
  const [w, h] = [canvas.width, canvas.height];
  const pad = { l: 64, r: 14, t: 12, b: 46 };
  frame(ctx, w, h, pad);
  if (!sample) return;

  const rMax = 11.5;
  const vMax = Math.max(...sample.data.map((d) => Math.abs(d[1]))) * 1.1 || 1;
  const px = (r) => pad.l + (r / rMax) * (w - pad.l - pad.r);
  const py = (v) => h - pad.b - ((v + vMax) / (2 * vMax)) * (h - pad.t - pad.b);

  ticks(ctx, pad, w, h, [0, rMax], [-vMax, vMax],
    (x) => x.toFixed(0), (y) => y.toFixed(0));
  axisLabel(ctx, "projected radius r_p (kpc)", (pad.l + w - pad.r) / 2, h - 10);
  axisLabel(ctx, "line-of-sight velocity v₃ (km/s)", 16, h / 2, -Math.PI / 2);

  ctx.strokeStyle = "#2a333d";
  ctx.beginPath();
  ctx.moveTo(pad.l, py(0));
  ctx.lineTo(w - pad.r, py(0));
  ctx.stroke();

  ctx.fillStyle = ACCENT;
  for (const [r, v] of sample.data) {
    ctx.beginPath();
    ctx.arc(px(r), py(v), 2.4, 0, 2 * Math.PI);
    ctx.fill();
  }

  // Per-annulus dispersion bars: ±σ_p around zero.
  ctx.strokeStyle = TRUTH;
  ctx.lineWidth = 2;
  for (const [rMid, sig] of sample.dispersion) {
    ctx.beginPath();
    ctx.moveTo(px(rMid), py(sig));
    ctx.lineTo(px(rMid), py(-sig));
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(px(rMid) - 5, py(sig));
    ctx.lineTo(px(rMid) + 5, py(sig));
    ctx.moveTo(px(rMid) - 5, py(-sig));
    ctx.lineTo(px(rMid) + 5, py(-sig));
    ctx.stroke();
  }
  ctx.lineWidth = 1;
}

// --- profile panel ----------------------------------------------------------

function drawProfile(report) {
  const canvas = $("profile");
  const ctx = canvas.getContext("2d");
  const [w, h] = [canvas.width, canvas.height];
  const pad = { l: 70, r: 14, t: 12, b: 46 };
  frame(ctx, w, h, pad);
  if (!sample) return;

  const rMax = 12;
  const rhoVals = sample.truth_rho.map((p) => p[1]).filter((v) => v > 0);
  if (report) {
    for (const [, , v] of report.rho) if (v > 0) rhoVals.push(v);
  }
  const logLo = Math.log10(Math.min(...rhoVals)) - 0.3;
  const logHi = Math.log10(Math.max(...rhoVals)) + 0.3;
  const px = (r) => pad.l + (r / rMax) * (w - pad.l - pad.r);
  const py = (rho) =>
    h - pad.b - ((Math.log10(Math.max(rho, 1e-30)) - logLo) / (logHi - logLo)) * (h - pad.t - pad.b);

  ticks(ctx, pad, w, h, [0, rMax], [logLo, logHi],
    (x) => x.toFixed(0), (y) => "1e" + y.toFixed(1));
  axisLabel(ctx, "radius r (kpc)", (pad.l + w - pad.r) / 2, h - 10);
  axisLabel(ctx, "log₁₀ ρ (M☉/kpc³)", 16, h / 2, -Math.PI / 2);

  // Truth curve.
  ctx.strokeStyle = TRUTH;
  ctx.lineWidth = 2;
  ctx.beginPath();
  sample.truth_rho.forEach(([r, rho], i) => {
    if (i === 0) ctx.moveTo(px(r), py(rho));
    else ctx.lineTo(px(r), py(rho));
  });
  ctx.stroke();

  // Current fit as a step curve.
  if (report) {
    ctx.strokeStyle = ACCENT;
    ctx.lineWidth = 2;
    ctx.beginPath();
    report.rho.forEach(([lo, hi, v], i) => {
      if (i === 0) ctx.moveTo(px(lo), py(v));
      else ctx.lineTo(px(lo), py(v));
      ctx.lineTo(px(Math.min(hi, rMax)), py(v));
    });
    ctx.stroke();
    $("massline").textContent =
      `M(<${report.mass_radius} kpc): fit ${(report.enclosed_mass / 1e11).toFixed(2)}e11, ` +
      `truth ${(sample.truth_mass / 1e11).toFixed(2)}e11 M☉`;
  } else {
    $("massline").textContent =
      `truth M(<${sample.mass_radius} kpc) = ${(sample.truth_mass / 1e11).toFixed(2)}e11 M☉`;
  }
  ctx.lineWidth = 1;
}

// --- wiring -----------------------------------------------------------------

function generate() {
  const params = {
    kind: $("kind").value,
    n: Math.max(8, Number($("n").value) | 0),
    seed: Number($("seed").value) | 0,
    noise_sigma: Math.max(0, Number($("noise").value)),
  };
  try {
    sample = JSON.parse(synthesize(JSON.stringify(params)));
  } catch (e) {
    status(`synthesis failed: ${e}`);
    return;
  }
  inference = null;
  running = false;
  $("fit").disabled = false;
  $("pause").disabled = true;
  drawScatter();
  drawProfile(null);
  status(`sample ready: ${sample.data.length} stars, σ = ${sample.sigma.toFixed(0)} km/s.\nStart the fit to recover ρ(r).`);
}

function startFit() {
  if (!sample) return;
  const params = {
    total_steps: Math.max(100, Number($("steps").value) | 0),
    seed: Number($("fitseed").value) | 0,
  };
  try {
    inference = new Inference(JSON.stringify(sample), JSON.stringify(params));
  } catch (e) {
    status(`fit setup failed: ${e}`);
    return;
  }
  running = true;
  $("pause").disabled = false;
  $("pause").textContent = "Pause";
  requestAnimationFrame(tick);
}

function tick() {
  if (!inference || !running) return;
  let report;
  try {
    report = JSON.parse(inference.step_batch(25));
  } catch (e) {
    status(`fit failed: ${e}`);
    running = false;
    return;
  }
  drawProfile(report);
  status(
    `step ${report.step}/${report.total_steps}  ·  T = ${report.temperature.toFixed(3)}\n` +
    `ln L = ${report.log_likelihood.toFixed(1)}  (best ${report.best_penalized.toFixed(1)})\n` +
    `batch acceptance ${(100 * report.batch_acceptance).toFixed(0)}%`
  );
  if (report.done) {
    running = false;
    $("pause").disabled = true;
    status(
      `done after ${report.step} proposals.\n` +
      `best penalized ln L = ${report.best_penalized.toFixed(1)}\n` +
      `M(<${report.mass_radius} kpc) = ${(report.enclosed_mass / 1e11).toFixed(2)}e11 M☉`
    );
    return;
  }
  requestAnimationFrame(tick);
}

function togglePause() {
  if (!inference) return;
  running = !running;
  $("pause").textContent = running ? "Pause" : "Resume";
  if (running) requestAnimationFrame(tick);
}

init().then(() => {
  $("generate").addEventListener("click", generate);
  $("fit").addEventListener("click", startFit);
  $("pause").addEventListener("click", togglePause);
  status("module loaded. Generate a sample to begin.");
}).catch((e) => status(`failed to load wasm module: ${e}`));
