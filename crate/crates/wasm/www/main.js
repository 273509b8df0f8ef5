import init, { solve_radial, nehari_landscape, verify_suite, mutation_names } from "./pkg/spnodal_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guard(out, f) {
  try {
    f();
  } catch (e) {
    out.textContent = "error: " + e;
  }
}

function plotLines(canvas, xs, series) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.ys);
  const lo = Math.min(0, ...all), hi = Math.max(0, ...all);
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => 40 + ((x - x0) / (x1 - x0)) * (w - 50);
  const py = (y) => h - 20 - ((y - lo) / (hi - lo || 1)) * (h - 30);
  g.strokeStyle = "#999";
  g.beginPath();
  g.moveTo(px(x0), py(0));
  g.lineTo(px(x1), py(0));
  g.stroke();
  g.fillStyle = "#333";
  g.fillText(hi.toPrecision(3), 2, py(hi) + 4);
  g.fillText(lo.toPrecision(3), 2, py(lo));
  series.forEach((s, k) => {
    g.strokeStyle = s.color;
    g.beginPath();
    xs.forEach((x, i) => (i ? g.lineTo(px(x), py(s.ys[i])) : g.moveTo(px(x), py(s.ys[i]))));
    g.stroke();
    g.fillStyle = s.color;
    g.fillText(s.label, w - 120, 14 + 14 * k);
  });
}

function runSolve() {
  const out = $("solve-out");
  out.textContent = "solving...";
  setTimeout(() =>
    guard(out, () => {
      const r = JSON.parse(solve_radial(num("solve-n"), num("solve-p")));
      const scale = (ys) => {
        const m = Math.max(...ys.map(Math.abs)) || 1;
        return ys.map((y) => y / m);
      };
      plotLines($("solve-plot"), r.r, [
        { label: "nodal", color: "#c33", ys: scale(r.nodal) },
        { label: "ground", color: "#36c", ys: scale(r.ground) },
        { label: "potential", color: "#393", ys: scale(r.potential) },
      ]);
      out.textContent =
        `nodal energy  ${r.c0}\nground energy ${r.c_n}\nratio         ${r.c0 / r.c_n}\n` +
        `domains       ${r.nodal_domains}\niterations    ${r.iterations} (${r.converged ? "converged" : "not converged"})\n` +
        "curves are scaled to unit maximum";
    }), 10);
}

function runLandscape() {
  const out = $("land-out");
  guard(out, () => {
    const r = JSON.parse(nehari_landscape(num("land-p"), num("land-shell"), num("land-max"), 120));
    const c = $("land-plot");
    const g = c.getContext("2d");
    const m = r.t.length;
    const cell = c.width / m;
    // Sign-preserving log scale so the saddle stays visible.
    const tone = (v) => Math.sign(v) * Math.log1p(Math.abs(v));
    const vals = r.h.map(tone);
    const hi = Math.max(...vals.map(Math.abs)) || 1;
    for (let i = 0; i < m; i++) {
      for (let j = 0; j < m; j++) {
        const v = vals[i * m + j] / hi;
        const a = Math.round(255 * (1 - Math.abs(v)));
        g.fillStyle = v >= 0 ? `rgb(255,${a},${a})` : `rgb(${a},${a},255)`;
        g.fillRect(i * cell, c.height - (j + 1) * cell, cell + 1, cell + 1);
      }
    }
    const span = r.t[m - 1];
    const px = (t) => (t / span) * c.width;
    const py = (s) => c.height - (s / span) * c.height;
    g.strokeStyle = "#000";
    g.strokeRect(px(r.box_r), py(r.box_big_r), px(r.box_big_r) - px(r.box_r), py(r.box_r) - py(r.box_big_r));
    g.fillStyle = "#000";
    g.beginPath();
    g.arc(px(r.t_star), py(r.s_star), 4, 0, 2 * Math.PI);
    g.fill();
    out.textContent =
      `t* = ${r.t_star}\ns* = ${r.s_star}\nh(t*, s*) = ${r.h_star}\nbox [${r.box_r}, ${r.box_big_r}]²\n` +
      "horizontal axis t, vertical axis s; red is positive energy, blue negative";
  });
}

function runVerify() {
  const out = $("ver-out");
  out.textContent = "running...";
  setTimeout(() =>
    guard(out, () => {
      const r = JSON.parse(verify_suite(63, 5, num("ver-seed"), num("ver-samples"), $("ver-mutation").value));
      out.innerHTML = "";
      for (const c of r.checks) {
        const line = document.createElement("div");
        const state = !c.tested ? "SKIP" : c.passed ? "PASS" : "FAIL";
        line.className = c.passed ? "pass" : "fail";
        line.textContent = `[${state}] ${c.name}  worst ${c.worst === null ? "n/a" : c.worst.toExponential(3)}  tol ${c.tolerance.toExponential(1)}`;
        out.appendChild(line);
      }
      const total = document.createElement("div");
      total.textContent = r.passed ? "suite passed" : `suite failed (${r.checks.filter((c) => !c.passed).length} checks)`;
      out.appendChild(total);
    }), 10);
}

await init();
for (const name of JSON.parse(mutation_names())) {
  const opt = document.createElement("option");
  opt.value = opt.textContent = name;
  $("ver-mutation").appendChild(opt);
}
$("solve-run").onclick = runSolve;
$("land-run").onclick = runLandscape;
$("ver-run").onclick = runVerify;
