import init, { arm_front, arm_policy, gridworld_policy } from "./pkg/handoff_demo.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => Number(x).toPrecision(5);
const arrows = { N: "↑", S: "↓", E: "→", W: "←" };

function guard(f) {
  try {
    $("error").textContent = "";
    f();
  } catch (e) {
    $("error").textContent = String(e.message || e);
  }
}

function plot(front) {
  const w = 480, h = 320, m = 50;
  const pts = front.points.concat([
    { u1: front.f1.u1, u2: front.f1.u2, tag: "f1*" },
    { u1: front.f2.u1, u2: front.f2.u2, tag: "f2*" },
  ]);
  const span = (k) => {
    let lo = Math.min(...pts.map((p) => p[k])), hi = Math.max(...pts.map((p) => p[k]));
    if (hi - lo < 1e-9) { lo -= 0.5; hi += 0.5; }
    const pad = 0.05 * (hi - lo);
    return [lo - pad, hi + pad];
  };
  const [x0, x1] = span("u1"), [y0, y1] = span("u2");
  const sx = (x) => m + ((x - x0) / (x1 - x0)) * (w - 2 * m);
  const sy = (y) => h - m - ((y - y0) / (y1 - y0)) * (h - 2 * m);
  let s = `<svg width="${w}" height="${h}"><path d="M${m} ${m} V${h - m} H${w - m}" fill="none" stroke="#000"/>`;
  s += `<text x="${w / 2}" y="${h - 15}" text-anchor="middle" font-size="12">u1</text>`;
  s += `<text x="15" y="${h / 2}" font-size="12">u2</text>`;
  s += `<text x="${m}" y="${h - m + 15}" font-size="10">${fmt(x0)}</text>`;
  s += `<text x="${w - m}" y="${h - m + 15}" font-size="10" text-anchor="end">${fmt(x1)}</text>`;
  s += `<text x="${m - 4}" y="${h - m}" font-size="10" text-anchor="end">${fmt(y0)}</text>`;
  s += `<text x="${m - 4}" y="${m}" font-size="10" text-anchor="end">${fmt(y1)}</text>`;
  for (const p of pts) {
    const fill = p.tag ? "#b3261e" : "steelblue";
    const label = p.tag || `w1=${fmt(p.w1)}`;
    s += `<circle cx="${sx(p.u1)}" cy="${sy(p.u2)}" r="4" fill="${fill}"><title>${label}: u1=${fmt(p.u1)} u2=${fmt(p.u2)}</title></circle>`;
  }
  $("front-plot").innerHTML = s + "</svg>";
  $("front-info").textContent =
    `ideal (${front.ideal.map(fmt).join(", ")}), nadir (${front.nadir.map(fmt).join(", ")})`;
}

function showFront() {
  guard(() => plot(JSON.parse(arm_front(Number($("front-n").value)))));
}

function showArm() {
  const w = Number($("arm-w").value);
  $("arm-w-val").textContent = w.toFixed(2);
  guard(() => {
    const v = JSON.parse(arm_policy(w));
    $("arm-profile").textContent = `u1 = ${fmt(v.profile.u1)}, u2 = ${fmt(v.profile.u2)}`;
    let rows = "<tr><th>state</th><th>phase</th><th>actions</th></tr>";
    for (const r of v.rows) {
      const acts = r.actions.map((a) => `${a.action} ${fmt(a.prob)}`).join("<br>");
      rows += `<tr><td>${r.state}</td><td>${r.phase}</td><td>${acts}</td></tr>`;
    }
    $("arm-table").innerHTML = rows;
  });
}

function showGrid() {
  const w = Number($("grid-w").value);
  $("grid-w-val").textContent = w.toFixed(1);
  guard(() => {
    const v = JSON.parse(gridworld_policy(w, ""));
    const sel = $("grid-level");
    if (!sel.options.length) {
      v.levels.forEach((l, i) => sel.add(new Option(l, String(i))));
      sel.value = "0";
    }
    const lvl = Number(sel.value);
    $("grid-profile").textContent = `u1 = ${fmt(v.profile.u1)}, u2 = ${fmt(v.profile.u2)}`;
    const g = $("grid");
    g.style.gridTemplateColumns = `repeat(${v.cols}, auto)`;
    g.innerHTML = "";
    for (const c of v.cells) {
      const d = document.createElement("div");
      d.className = "cell " + (c.obstacle ? "obstacle" : c.terrain);
      if (c.row === v.start[0] && c.col === v.start[1]) d.classList.add("start");
      const mv = c.moves[lvl];
      const region = c.region ? `R${c.region}` : "";
      if (c.obstacle) {
        d.textContent = "X";
      } else if (mv) {
        d.innerHTML = `<span class="dir${mv.human ? " human" : ""}">${arrows[mv.dir] || mv.dir}</span>` +
          `<span>${region} ${mv.event}</span>`;
        d.title = `p=${fmt(mv.prob)}`;
      } else {
        d.textContent = region || "·";
      }
      g.appendChild(d);
    }
  });
}

await init();
$("front-go").addEventListener("click", showFront);
$("arm-w").addEventListener("input", showArm);
$("grid-w").addEventListener("change", showGrid);
$("grid-level").addEventListener("change", showGrid);
showFront();
showArm();
showGrid();
