import init, { simulate, exploreWeights, junctionScattering } from "./pkg/telegraphnet_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function call(fn, request) {
  return JSON.parse(fn(JSON.stringify(request)));
}

function values(form) {
  const out = {};
  for (const el of form.elements) {
    if (!el.name) continue;
    out[el.name] = el.type === "number" ? Number(el.value) : el.value;
  }
  return out;
}

// series: [{ label, color, dashed, points: [[x, y], ...] }]
function plot(canvas, series, yRange) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = { l: 50, r: 120, t: 10, b: 30 };
  ctx.clearRect(0, 0, width, height);
  const xs = series.flatMap(s => s.points.map(p => p[0]));
  const ys = series.flatMap(s => s.points.map(p => p[1]));
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  let [y0, y1] = yRange ?? [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const px = x => pad.l + (x - x0) / (x1 - x0) * (width - pad.l - pad.r);
  const py = y => height - pad.b - (y - y0) / (y1 - y0) * (height - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.setLineDash([]);
  ctx.strokeRect(pad.l, pad.t, width - pad.l - pad.r, height - pad.t - pad.b);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let j = 0; j <= 4; j++) {
    const x = x0 + (x1 - x0) * j / 4, y = y0 + (y1 - y0) * j / 4;
    ctx.fillText(x.toFixed(2), px(x) - 10, height - pad.b + 14);
    ctx.fillText(y.toPrecision(3), 4, py(y) + 4);
  }
  if (y0 < 0 && y1 > 0) {
    ctx.beginPath();
    ctx.moveTo(pad.l, py(0));
    ctx.lineTo(width - pad.r, py(0));
    ctx.stroke();
  }
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.setLineDash(s.dashed ? [5, 4] : []);
    ctx.beginPath();
    s.points.forEach(([x, y], i) => (i ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, width - pad.r + 8, pad.t + 14 + 14 * k);
  });
}

function edgeSeries(edges, field, dashed) {
  return edges.map((e, k) => ({
    label: `edge ${e.id}`,
    color: COLORS[k % COLORS.length],
    dashed,
    points: e.x.map((x, i) => [x, e[field][i]]),
  }));
}

function fail(section, err) {
  const status = section.querySelector(".status");
  status.className = "status fail";
  status.textContent = String(err);
}

let animation = 0;

function setupSimulation() {
  const section = document.getElementById("simulate");
  const form = section.querySelector("form");
  const canvas = section.querySelector("canvas");
  const status = section.querySelector(".status");
  form.addEventListener("submit", ev => {
    ev.preventDefault();
    cancelAnimationFrame(animation);
    const v = values(form);
    const edge = Number(v.edge);
    // Pulse centre halfway along the chosen edge with unit lengths.
    const start = { 1: 0, 2: 1, 3: 1, 4: 2, 5: 2 }[edge];
    let r;
    try {
      r = call(simulate, {
        lengths: [1, 1, 1, 1, 1],
        coefficients: [v.p1, v.p2, v.p3, v.p4],
        edge,
        center: start + 0.5,
        width: 0.06,
        travel: v.travel,
        cells_per_unit: 120,
        horizon: v.horizon,
        frames: 120,
      });
    } catch (e) {
      return fail(section, e);
    }
    const ys = r.frames.flatMap(f => f.edges.flatMap(e => e.voltage));
    const range = [Math.min(...ys, 0), Math.max(...ys)];
    const e0 = r.frames[0].energy;
    let j = 0, last = 0;
    const step = now => {
      if (now - last > 40) {
        const f = r.frames[j];
        plot(canvas, edgeSeries(f.edges, "voltage", false), range);
        status.className = "status";
        status.textContent =
          `t = ${f.t.toFixed(3)}   energy / initial = ${(f.energy / e0).toFixed(5)}   ` +
          `max Kirchhoff residual = ${r.max_kirchhoff_residual.toExponential(1)}` +
          (r.warnings.length ? "\n" + r.warnings.join("\n") : "");
        j += 1;
        last = now;
      }
      if (j < r.frames.length) animation = requestAnimationFrame(step);
    };
    animation = requestAnimationFrame(step);
  });
  form.requestSubmit();
}

function setupWeights() {
  const section = document.getElementById("weights");
  const form = section.querySelector("form");
  const canvas = section.querySelector("canvas");
  const body = section.querySelector("tbody");
  const status = section.querySelector(".status");
  form.addEventListener("submit", ev => {
    ev.preventDefault();
    const v = values(form);
    let r;
    try {
      r = call(exploreWeights, {
        lengths: [1, 1, 1, 1, 1],
        coefficients: [v.p1, v.p2, 0, 0],
        root_alpha: v.alpha,
        root_xstar: v.xstar,
        beta: v.beta,
        horizon: v.horizon,
        cells_per_unit: 40,
        steps: 40,
      });
    } catch (e) {
      return fail(section, e);
    }
    plot(canvas, [...edgeSeries(r.edges, "phi_initial", false), ...edgeSeries(r.edges, "phi_final", true)]);
    body.innerHTML = r.edges
      .map(e => `<tr><td>${e.id}</td><td>${e.alpha.toPrecision(4)}</td><td>${e.xstar.toPrecision(4)}</td>` +
        `<td class="${e.sufficient ? "pass" : "fail"}">${e.sufficient ? "yes" : "no"}</td></tr>`)
      .join("");
    status.className = r.pass ? "status pass" : "status fail";
    status.textContent =
      `solid: φ(x, 0), dashed: φ(x, T)\n` +
      `pseudo-convexity ${r.pass ? "holds" : "fails"}: min |D| = ${r.min_abs.toPrecision(4)} ` +
      `at edge ${r.worst_edge}, x = ${r.worst_x.toFixed(3)}, t = ${r.worst_t.toFixed(3)}\n` +
      `level sets ${r.geometry_pass ? "separate" : "overlap"}: min φ(·,0) = ${r.min_initial.toPrecision(4)}, ` +
      `max φ(·,±T) = ${r.max_final.toPrecision(4)}\n` +
      `vertex defect = ${r.vertex_defect.toExponential(1)}`;
  });
  form.requestSubmit();
}

function setupScattering() {
  const section = document.getElementById("scattering");
  const form = section.querySelector("form");
  const canvas = section.querySelector("canvas");
  const body = section.querySelector("tbody");
  const status = section.querySelector(".status");
  form.addEventListener("submit", ev => {
    ev.preventDefault();
    const branches = form.elements.branches.value
      .split("\n")
      .map(l => l.trim())
      .filter(Boolean)
      .map(l => l.split(/[\s,]+/).map(Number));
    let r;
    try {
      r = call(junctionScattering, { branches, cells_per_unit: 300 });
    } catch (e) {
      return fail(section, e);
    }
    plot(canvas, edgeSeries(r.edges, "voltage", false));
    const row = (name, m, p) =>
      `<tr><td>${name}</td><td>${m.toFixed(4)}</td><td>${p.toFixed(4)}</td></tr>`;
    body.innerHTML =
      row("reflected", r.reflected, r.predicted_reflected) +
      r.transmitted.map((t, j) => row(`branch ${j + 1}`, t, r.predicted_transmitted)).join("");
    status.className = "status";
    status.textContent = `voltage at t = ${r.t.toFixed(3)}`;
  });
  form.requestSubmit();
}

await init();
setupSimulation();
setupWeights();
setupScattering();
