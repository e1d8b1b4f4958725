import init, { graded_join, stratified_summary, review_steps } from "./pkg/agint_web.js";

const STRENGTHS = ["bot", "w", "s"];
const BASES = ["model", "located", "applicable", "corroborated", "checked"];

function select(options, value) {
  const el = document.createElement("select");
  for (const o of options) {
    const opt = document.createElement("option");
    opt.textContent = o;
    el.appendChild(opt);
  }
  el.value = value;
  return el;
}

function setupGraded() {
  const host = document.getElementById("graded");
  const fields = ["a support", "a refute", "b support", "b refute"].map((name, i) => {
    const label = document.createElement("label");
    label.textContent = name + " ";
    const el = select(STRENGTHS, ["w", "bot", "bot", "s"][i]);
    label.appendChild(el);
    host.appendChild(label);
    host.appendChild(document.createTextNode(" "));
    return el;
  });
  const out = document.getElementById("graded-out");
  const update = () => {
    const r = JSON.parse(graded_join(...fields.map((f) => f.value)));
    out.textContent = `${r.a} ⊔ ${r.b} = ${r.join}    a ⊑ b: ${r.a_leq_b}    b ⊑ a: ${r.b_leq_a}`;
  };
  fields.forEach((f) => f.addEventListener("change", update));
  update();
}

function setupSummary() {
  const host = document.getElementById("records");
  const out = document.getElementById("summary-out");
  const rows = [];
  const update = () => {
    const records = rows.map(([s, b]) => ({ strength: s.value, basis: b.value }));
    try {
      const r = JSON.parse(stratified_summary(JSON.stringify(records)));
      out.className = "out";
      out.textContent = r.levels.map((l) => `${l.basis}: ${l.strength}`).join("   ");
    } catch (e) {
      out.className = "out err";
      out.textContent = String(e);
    }
  };
  const add = (strength, basis) => {
    const div = document.createElement("div");
    const s = select(["w", "s"], strength);
    const b = select(BASES, basis);
    const remove = document.createElement("button");
    remove.textContent = "remove";
    const row = [s, b];
    remove.addEventListener("click", () => {
      rows.splice(rows.indexOf(row), 1);
      div.remove();
      update();
    });
    [s, b].forEach((el) => el.addEventListener("change", update));
    div.append(s, " at ", b, " ", remove);
    host.appendChild(div);
    rows.push(row);
    update();
  };
  document.getElementById("add-record").addEventListener("click", () => add("w", "model"));
  add("s", "model");
  add("w", "checked");
}

function setupStepper() {
  const host = document.getElementById("table");
  const verdict = document.getElementById("verdict");
  let data = null;
  let shown = 0;
  let total = 0;

  const render = () => {
    host.replaceChildren();
    let remaining = shown;
    for (const epoch of data.epochs) {
      if (remaining <= 0) break;
      if (epoch.title) {
        const h = document.createElement("h3");
        h.textContent = epoch.title;
        host.appendChild(h);
      }
      const table = document.createElement("table");
      const head = table.insertRow();
      for (const c of epoch.header) {
        const th = document.createElement("th");
        th.textContent = c;
        head.appendChild(th);
      }
      const rows = epoch.rows.slice(0, remaining);
      rows.forEach((cells, i) => {
        const tr = table.insertRow();
        if (remaining === rows.length && i === rows.length - 1) tr.className = "current";
        for (const c of cells) tr.insertCell().textContent = c;
      });
      remaining -= rows.length;
      host.appendChild(table);
    }
    verdict.textContent = shown === total ? `${data.policy}: ${data.verdict ?? ""}` : "";
  };

  const reset = () => {
    const policy = document.getElementById("policy").value;
    const revision = document.getElementById("revision").checked;
    try {
      data = JSON.parse(review_steps(policy, revision));
      total = data.epochs.reduce((n, e) => n + e.rows.length, 0);
      shown = 1;
      render();
    } catch (e) {
      host.textContent = String(e);
    }
  };

  document.getElementById("reset").addEventListener("click", reset);
  document.getElementById("policy").addEventListener("change", reset);
  document.getElementById("revision").addEventListener("change", reset);
  document.getElementById("step").addEventListener("click", () => {
    if (data && shown < total) {
      shown += 1;
      render();
    }
  });
  document.getElementById("all").addEventListener("click", () => {
    if (data) {
      shown = total;
      render();
    }
  });
  reset();
}

await init();
setupGraded();
setupSummary();
setupStepper();
