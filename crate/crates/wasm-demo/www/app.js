import init, { simulate_field, explore_patterns, prior_curves } from "./pkg/minerisk_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = { random: "#999", sequential: "#3a7", linear: "#c33", curved: "#36c", bayesian: "#a5c" };

function call(fn, request) {
  try {
    return JSON.parse(fn(JSON.stringify(request)));
  } catch (e) {
    $("status").textContent = String(e);
    $("status").className = "err";
    return null;
  }
}

function lineChart(canvas, series, xLabel, yLabel) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  const xmax = Math.max(...series.flatMap((s) => s.xs));
  ctx.strokeStyle = "#000";
  ctx.strokeRect(pad, 8, w - pad - 8, h - pad - 8);
  ctx.fillStyle = "#000";
  ctx.fillText(xLabel, w / 2 - 30, h - 8);
  ctx.fillText(yLabel, 2, 20);
  ctx.fillText("1", pad - 12, 16);
  ctx.fillText("0", pad - 12, h - pad);
  ctx.fillText(String(Math.round(xmax)), w - 40, h - pad + 14);
  const X = (x) => pad + (x / xmax) * (w - pad - 8);
  const Y = (y) => h - pad - y * (h - pad - 16);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(X(x), Y(s.ys[i])) : ctx.moveTo(X(x), Y(s.ys[i]))));
    ctx.stroke();
  }
}

// virtual clearance

let sim = null;

function runSimulation() {
  const spec = {
    pattern: $("sim-pattern").value,
    n_mines: +$("sim-mines").value,
    clusters: +$("sim-clusters").value,
    width: +$("sim-size").value,
    height: +$("sim-size").value,
    seed: +$("sim-seed").value,
  };
  $("status").textContent = "simulating...";
  $("status").className = "";
  const result = call(simulate_field, { spec });
  if (!result) return;
  $("status").textContent = "ready";
  sim = result;
  const sel = $("sim-deminer");
  sel.innerHTML = sim.traces.map((t, i) => `<option value="${i}">${t.deminer}</option>`).join("");
  const n = sim.n_cols * sim.n_rows;
  $("sim-step").max = n;
  $("sim-step").value = n;
  lineChart(
    $("sim-chart"),
    sim.traces.map((t) => ({ color: COLORS[t.deminer], xs: t.shares.map((_, i) => (100 * (i + 1)) / n), ys: t.shares })),
    "% tiles cleared",
    "share found",
  );
  $("sim-legend").innerHTML = sim.traces.map((t) => `<span style="color:${COLORS[t.deminer]}">${t.deminer}</span>`).join("");
  const rows = sim.traces
    .map((t) => {
      const c = t.scorecard;
      return `<tr><td>${t.deminer}</td><td>${c.demining_score.toFixed(4)}</td><td>${c.t50.toFixed(1)}</td><td>${c.t75.toFixed(1)}</td><td>${c.t90.toFixed(1)}</td><td>${c.t100.toFixed(1)}</td></tr>`;
    })
    .join("");
  $("sim-table").innerHTML = `<tr><th>deminer</th><th>Demining Score</th><th>T50</th><th>T75</th><th>T90</th><th>T100</th></tr>${rows}`;
  drawGrid();
}

function drawGrid() {
  if (!sim) return;
  const canvas = $("sim-grid");
  const ctx = canvas.getContext("2d");
  const cell = Math.min(canvas.width / sim.n_cols, canvas.height / sim.n_rows);
  const trace = sim.traces[+$("sim-deminer").value];
  const step = +$("sim-step").value;
  const cleared = new Map(trace.route.slice(0, step).map((t, i) => [t, i]));
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let t = 0; t < sim.n_cols * sim.n_rows; t++) {
    const col = t % sim.n_cols, row = Math.floor(t / sim.n_cols);
    const x = col * cell, y = canvas.height - (row + 1) * cell;
    ctx.fillStyle = cleared.has(t) ? "#dde8dd" : "#fff";
    ctx.fillRect(x, y, cell, cell);
    ctx.strokeStyle = "#eee";
    ctx.strokeRect(x, y, cell, cell);
  }
  const scale = cell / sim.tile_size;
  for (const m of sim.mines) {
    const t = Math.min(sim.n_cols - 1, Math.floor(m.x / sim.tile_size)) + sim.n_cols * Math.min(sim.n_rows - 1, Math.floor(m.y / sim.tile_size));
    ctx.fillStyle = cleared.has(t) ? "#c33" : "#bbb";
    ctx.beginPath();
    ctx.arc(m.x * scale, canvas.height - m.y * scale, 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }
  const share = step ? trace.shares[step - 1] : 0;
  $("sim-step-label").textContent = `${step} tiles, ${(100 * share).toFixed(0)}% of mines found`;
}

// clusters and patterns

let points = [];
const PAT_M = 600;

function explore() {
  const canvas = $("pat-canvas");
  const ctx = canvas.getContext("2d");
  const s = canvas.width / PAT_M;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const X = (p) => p.x * s, Y = (p) => canvas.height - p.y * s;
  const hyper = { landmine_weight: 60, cluster_max_distance: +$("pat-eps").value, pc_smoothness_factor: +$("pat-smooth").value };
  const res = points.length ? call(explore_patterns, { points, hyperparameters: hyper }) : { clusters: [], noise: [] };
  if (!res) return;
  const palette = ["#c33", "#36c", "#3a7", "#a5c", "#c83", "#399"];
  const colorOf = new Map();
  res.clusters.forEach((c, k) => c.members.forEach((i) => colorOf.set(i, palette[k % palette.length])));
  for (const c of res.clusters) {
    if (c.linear) {
      ctx.strokeStyle = "#aaa";
      ctx.setLineDash([4, 4]);
      ctx.beginPath();
      ctx.moveTo(X(c.linear[0]), Y(c.linear[0]));
      ctx.lineTo(X(c.linear[1]), Y(c.linear[1]));
      ctx.stroke();
      ctx.setLineDash([]);
    }
    if (c.curved) {
      ctx.strokeStyle = "#222";
      ctx.beginPath();
      c.curved.forEach((p, i) => (i ? ctx.lineTo(X(p), Y(p)) : ctx.moveTo(X(p), Y(p))));
      ctx.stroke();
    }
  }
  points.forEach((p, i) => {
    ctx.fillStyle = colorOf.get(i) || "#000";
    ctx.beginPath();
    ctx.arc(X(p), Y(p), 4, 0, 2 * Math.PI);
    ctx.fill();
  });
  $("pat-info").textContent = `${points.length} mines, ${res.clusters.length} clusters. Dashed: line pattern; solid: principal curve.`;
}

function onPatternClick(ev) {
  const canvas = $("pat-canvas");
  const r = canvas.getBoundingClientRect();
  const s = canvas.width / PAT_M;
  const p = { x: (ev.clientX - r.left) / s, y: (canvas.height - (ev.clientY - r.top)) / s };
  if (ev.shiftKey && points.length) {
    let best = 0;
    points.forEach((q, i) => {
      if (Math.hypot(q.x - p.x, q.y - p.y) < Math.hypot(points[best].x - p.x, points[best].y - p.y)) best = i;
    });
    points.splice(best, 1);
  } else {
    points.push(p);
  }
  explore();
}

function samplePoints() {
  points = [];
  for (let i = 0; i < 14; i++) {
    const a = 0.2 + (i / 13) * 1.6;
    points.push({ x: 300 + 220 * Math.cos(a) + (Math.random() - 0.5) * 6, y: 80 + 220 * Math.sin(a) + (Math.random() - 0.5) * 6 });
  }
  for (let i = 0; i < 6; i++) points.push({ x: 60 + 25 * i, y: 520 - 12 * i });
  explore();
}

// expert priors

function priors() {
  const est = {};
  for (const k of ["g90", "g75", "g50", "d90", "d75", "d50"]) {
    est[(k[0] === "g" ? "gamma" : "delta") + k.slice(1)] = +$(k).value;
  }
  const res = call(prior_curves, est);
  if (!res) return;
  $("status").textContent = "ready";
  $("status").className = "";
  lineChart(
    $("prior-chart"),
    [
      { color: "#c33", xs: res.along.map((c) => c.meters), ys: res.along.map((c) => c.risk) },
      { color: "#36c", xs: res.across.map((c) => c.meters), ys: res.across.map((c) => c.risk) },
    ],
    "meters (red: progress, blue: distance)",
    "risk",
  );
  const p = res.derivation.priors;
  const fmt = (v) => (v === null || v === undefined ? "" : v.toPrecision(4));
  $("prior-table").innerHTML =
    "<tr><th>coefficient</th><th>mean</th><th>sd</th><th>lower</th><th>upper</th></tr>" +
    ["beta0", "beta1", "beta2"]
      .map((b) => `<tr><td>${b}</td><td>${fmt(p[b].mu)}</td><td>${fmt(p[b].sigma)}</td><td>${fmt(p[b].lower)}</td><td>${fmt(p[b].upper)}</td></tr>`)
      .join("");
}

await init();
$("status").textContent = "ready";
$("sim-run").onclick = runSimulation;
$("sim-deminer").onchange = drawGrid;
$("sim-step").oninput = drawGrid;
$("pat-canvas").onclick = onPatternClick;
$("pat-eps").onchange = explore;
$("pat-smooth").onchange = explore;
$("pat-clear").onclick = () => {
  points = [];
  explore();
};
$("pat-sample").onclick = samplePoints;
for (const k of ["g90", "g75", "g50", "d90", "d75", "d50"]) $(k).onchange = priors;
runSimulation();
samplePoints();
priors();
