/** DOM rendering for the review screen; all state lives in the store. */

import type { QueueState } from "./store.js";

export function render(root: HTMLElement, state: QueueState): void {
  root.replaceChildren();

  const header = document.createElement("header");
  header.innerHTML =
    `<h1>Review queue</h1>` +
    `<p class="tally">accepted ${state.tally.accepted} · rejected ${state.tally.rejected} · ` +
    `edited ${state.tally.edited} · remaining ${state.remaining}</p>` +
    `<p class="keys">j/k move · a accept · r reject · e edit</p>`;
  root.appendChild(header);

  if (state.error) {
    const banner = document.createElement("div");
    banner.className = "banner error";
    banner.textContent = state.error;
    const retry = document.createElement("button");
    retry.textContent = "Retry";
    retry.dataset.action = "retry";
    banner.appendChild(retry);
    root.appendChild(banner);
  }

  if (state.loading) {
    const loading = document.createElement("p");
    loading.textContent = "Loading…";
    root.appendChild(loading);
    return;
  }

  if (state.items.length === 0) {
    const done = document.createElement("p");
    done.className = "complete";
    done.textContent = state.complete ? "Review complete — nothing left in the queue." : "Queue is empty.";
    root.appendChild(done);
    return;
  }

  const list = document.createElement("ul");
  list.className = "queue";
  state.items.forEach((item, index) => {
    const card = document.createElement("li");
    card.className = "card" + (index === state.selected ? " selected" : "");
    if (state.conflicts.has(item.qa_id)) card.classList.add("conflict");

    const question = document.createElement("h2");
    question.textContent = item.question;
    const answer = document.createElement("p");
    answer.className = "answer";
    answer.textContent = item.answer;
    const meta = document.createElement("p");
    meta.className = "meta";
    const cluster = item.cluster === null ? "–" : String(item.cluster);
    meta.textContent = `entailment ${item.aggregate_entailment.toFixed(1)} · cluster ${cluster} · ${item.source_id}`;
    if (state.conflicts.has(item.qa_id)) {
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.textContent = "conflict";
      meta.appendChild(badge);
    }
    card.append(question, answer, meta);
    list.appendChild(card);
  });
  root.appendChild(list);
}
