/** Entry point: wires the store, keyboard handler, and renderer together. */

import { ApiClient } from "./api.js";
import { handleKey, ReviewStore } from "./store.js";
import { render } from "./view.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app container");

const reviewer =
  new URLSearchParams(window.location.search).get("reviewer") ?? "curator";
const api = new ApiClient("");
const store = new ReviewStore(api, reviewer);

store.subscribe((state) => render(root, state));

root.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  if (target.dataset.action === "retry") void store.loadQueue(store.state.page);
});

window.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement || event.target instanceof HTMLTextAreaElement) {
    return;
  }
  void handleKey(store, event.key, () => window.prompt("Replacement answer:"));
});

void store.loadQueue(1);
