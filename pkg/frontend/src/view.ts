/** DOM rendering: queue cards, consistency badges, the resolution form. */

import { categoriesFor } from "./codebook.js";
import { QueueStore } from "./store.js";
import type { Channel, ItemSummary, ResolutionForm } from "./types.js";

const BADGE_CLASSES: Record<number, string> = {
  0: "badge badge-0",
  40: "badge badge-40",
  60: "badge badge-60",
  80: "badge badge-80",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function badge(consistency: number | null): HTMLElement {
  if (consistency === null) return el("span", "badge badge-failed", "ensemble failed");
  const cls = BADGE_CLASSES[consistency] ?? "badge";
  return el("span", cls, `consistency ${consistency}`);
}

function labelSelect(store: QueueStore, channel: Channel): HTMLSelectElement {
  const select = el("select");
  select.dataset.channel = channel;
  const none = el("option", undefined, "(no association)");
  none.value = "";
  select.append(none);
  if (store.codebook) {
    for (const category of categoriesFor(store.codebook, channel)) {
      const option = el("option", undefined, `${category.id} - ${category.name}`);
      option.value = category.id;
      select.append(option);
    }
  }
  return select;
}

function formValues(card: HTMLElement, store: QueueStore): ResolutionForm {
  const name = (card.querySelector("input[name=final_name]") as HTMLInputElement).value;
  const explanation = (card.querySelector("textarea[name=final_explanation]") as HTMLTextAreaElement).value;
  const labels: Record<string, string | null> = {};
  for (const select of card.querySelectorAll<HTMLSelectElement>("select[data-channel]")) {
    if (select.value) labels[select.dataset.channel as string] = select.value;
  }
  return {
    reviewer_id: store.reviewerId,
    final_name: name.trim() === "" ? null : name.trim(),
    final_explanation: explanation.trim() === "" ? null : explanation.trim(),
    final_labels: labels,
  };
}

function renderCard(store: QueueStore, item: ItemSummary): HTMLElement {
  const card = el("article", "card");
  const head = el("header");
  head.append(el("span", "record", item.record_id), badge(item.consistency));
  card.append(head);

  const context = item.context as { text?: string };
  if (context.text) card.append(el("p", "context", context.text));
  card.append(el(
    "p", "votes",
    `${item.n_votes} votes, ${item.n_failures} failures; provisional: ` +
      JSON.stringify(item.provisional_label),
  ));

  const nameInput = el("input");
  nameInput.name = "final_name";
  nameInput.placeholder = "final name (empty = null)";
  const explInput = el("textarea");
  explInput.name = "final_explanation";
  explInput.placeholder = "final explanation (empty = null)";
  const errorBox = el("p", "error");
  card.append(nameInput, explInput);
  for (const channel of ["semantic", "phonetic", "visual"] as Channel[]) {
    const row = el("label", "label-row", `${channel}: `);
    row.append(labelSelect(store, channel));
    card.append(row);
  }

  const acceptButton = el("button", "accept", "accept provisional (a)");
  const submitButton = el("button", "submit", "submit correction");
  card.append(acceptButton, submitButton, errorBox);

  const handle = async (form: ResolutionForm) => {
    const result = await store.submit(item, form);
    switch (result.kind) {
      case "invalid":
        errorBox.textContent = result.errors.join("; ");
        break;
      case "conflict":
        errorBox.textContent =
          "already resolved by someone else: " + JSON.stringify(result.existing);
        break;
      default:
        errorBox.textContent = "";
    }
  };
  acceptButton.addEventListener("click", () => void handle(store.provisionalForm(item)));
  submitButton.addEventListener("click", () => void handle(formValues(card, store)));
  card.addEventListener("keydown", (event) => {
    if (event.key === "a" && event.target === card) void handle(store.provisionalForm(item));
  });
  card.addEventListener("focusin", () => store.noteOpened(item), { once: true });
  card.tabIndex = 0;
  return card;
}

export function mount(root: HTMLElement, store: QueueStore): void {
  const banner = el("div", "banner");
  const list = el("div", "cards");
  const progressLine = el("p", "progress");
  root.append(banner, progressLine, list);

  store.subscribe((state) => {
    banner.textContent = state.authRequired
      ? "session expired: enter a valid review token"
      : state.stale
        ? "offline - showing the last fetched view"
        : "";
    banner.style.display = banner.textContent ? "block" : "none";

    if (state.progress) {
      const { resolved, total } = state.progress;
      progressLine.textContent =
        total === 0 || resolved === total
          ? `all resolved (${resolved}/${total})`
          : `progress: ${resolved}/${total}`;
    }

    list.replaceChildren(...state.items.map((item) => renderCard(store, item)));
  });
}
