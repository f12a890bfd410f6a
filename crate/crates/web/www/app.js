import init, { solve_full_csi, solve_bilevel, simulate_scenario } from "./pkg/relay_stopping_web.js";

const PARAMS = ["K", "L", "ps", "pr", "sigma_f_sq", "sigma_g_sq", "tau", "T", "p0", "p1"];
const INTS = new Set(["K", "L"]);

const $ = (id) => document.getElementById(id);
const out = $("out");
const status = $("status");

function request(curvePoints) {
  const params = {};
  for (const k of PARAMS) {
    const v = Number($(k).value);
    params[k] = INTS.has(k) ? Math.round(v) : v;
  }
  return JSON.stringify({
    params,
    mc_samples: Math.round(Number($("mc_samples").value)),
    packets: Math.round(Number($("packets").value)),
    seed: Math.round(Number($("seed").value)),
    scenario: $("scenario").value,
    curve_points: curvePoints,
  });
}

// Line plot with a vertical marker at `mark`.
function plot(points, mark, xLabel, yLabel) {
  const c = $("plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  if (!points.length) return;
  const pad = 46;
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y).concat([0]);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (c.width - 2 * pad);
  const sy = (y) => c.height - pad - ((y - y0) / (y1 - y0 || 1)) * (c.height - 2 * pad);

  g.strokeStyle = "#999";
  g.beginPath();
  g.moveTo(pad, sy(0));
  g.lineTo(c.width - pad, sy(0));
  g.stroke();

  g.strokeStyle = "#1f5fa8";
  g.lineWidth = 2;
  g.beginPath();
  points.forEach((p, i) => (i ? g.lineTo(sx(p.x), sy(p.y)) : g.moveTo(sx(p.x), sy(p.y))));
  g.stroke();
  g.lineWidth = 1;

  if (mark !== null) {
    g.strokeStyle = "#c33";
    g.setLineDash([5, 4]);
    g.beginPath();
    g.moveTo(sx(mark), pad / 2);
    g.lineTo(sx(mark), c.height - pad);
    g.stroke();
    g.setLineDash([]);
  }

  g.fillStyle = "#333";
  g.font = "12px system-ui";
  g.fillText(xLabel, c.width / 2 - 40, c.height - 12);
  g.fillText(`${x0.toFixed(2)}`, pad, c.height - pad + 16);
  g.fillText(`${x1.toFixed(2)}`, c.width - pad - 30, c.height - pad + 16);
  g.fillText(`${y1.toFixed(3)}`, 4, pad);
  g.fillText(`${y0.toFixed(3)}`, 4, c.height - pad);
  g.fillText(yLabel, pad + 6, 16);
}

function histogram(counts) {
  const shown = counts.slice(0, 30);
  return shown.map((n, i) => ({ x: i + 1, y: n }));
}

function run(label, fn) {
  status.textContent = `${label}…`;
  out.classList.remove("err");
  // let the status paint before the solver blocks the thread
  setTimeout(() => {
    const t = performance.now();
    try {
      fn();
      status.textContent = `${label}: ${((performance.now() - t) / 1000).toFixed(2)} s`;
    } catch (e) {
      out.textContent = String(e);
      out.classList.add("err");
      status.textContent = "";
    }
  }, 10);
}

function fullCsi() {
  const r = JSON.parse(solve_full_csi(request(300)));
  plot(r.throughput_curve, r.rate_threshold, "rate threshold", "throughput of the threshold rule");
  out.textContent =
    `lambda* = ${r.lambda_star.toFixed(6)}  (rate threshold 2 lambda* = ${r.rate_threshold.toFixed(6)})\n` +
    `residual ${r.residual.toExponential(2)} after ${r.iterations} iterations\n` +
    `The curve peaks where the dashed line marks 2 lambda*.`;
}

function bilevel() {
  const r = JSON.parse(solve_bilevel(request(12)));
  plot(r.value_curve, r.gamma_optimal, "gamma", "optimal-rule value V(gamma)");
  out.textContent =
    `gamma* intuitive = ${r.gamma_intuitive.toFixed(6)}  (residual ${r.residual_intuitive.toExponential(2)})\n` +
    `gamma* optimal   = ${r.gamma_optimal.toFixed(6)}  (residual ${r.residual_optimal.toExponential(2)})\n` +
    `gap = ${r.gap.toExponential(3)}\n` +
    `V(gamma) falls through zero at gamma* optimal.`;
}

function simulate() {
  const r = JSON.parse(simulate_scenario(request(2)));
  const z = r.stderr > 0 ? Math.abs(r.throughput - r.threshold) / r.stderr : 0;
  plot(histogram(r.observation_histogram), null, "main observations until transmission", "packets");
  out.textContent =
    `scenario ${r.scenario}: solved optimum ${r.threshold.toFixed(6)}\n` +
    `simulated throughput ${r.throughput.toFixed(6)} ± ${r.stderr.toFixed(6)}  (${z.toFixed(2)} stderr away)\n` +
    `mean main observations ${r.mean_main_observations.toFixed(3)}, mean contention time ${r.mean_contention.toFixed(4)}`;
}

await init();
out.textContent = "Ready.";
$("btn-full").onclick = () => run("full CSI", fullCsi);
$("btn-bilevel").onclick = () => run("bi-level", bilevel);
$("btn-sim").onclick = () => run("simulate", simulate);
