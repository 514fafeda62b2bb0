/** Single-page shell wiring the three screens to the service.
 *
 * All state is server state: every screen renders from a fresh fetch and
 * a refresh reproduces it exactly. The label form is keyboard-first; tab
 * order follows the field order (modality, location, pathology, grade,
 * sequence) and Enter accepts the sole remaining suggestion.
 */

import { ApiClient } from "./client.js";
import { buildAtlasView } from "./atlas.js";
import { csvErrorSummary, parseAssetIdCsv } from "./csv.js";
import { FIELD_ORDER, LabelFormState } from "./labelForm.js";
import type { LabelField } from "./labelForm.js";
import {
  castVoteIdempotent,
  queueEntries,
  voteErrorMessage,
  voteToast,
} from "./reviewQueue.js";
import type { AtlasViewModel } from "./atlas.js";
import type { VocabularyResponse } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className) node.className = className;
  return node;
}

function toast(text: string): void {
  const node = el("div", text, "toast");
  document.body.appendChild(node);
  setTimeout(() => node.remove(), 4000);
}

function renderLabelForm(
  root: HTMLElement,
  client: ApiClient,
  vocab: VocabularyResponse,
  assetId: string,
): void {
  root.replaceChildren();
  const form = new LabelFormState(vocab, assetId);
  const banner = el("p", "", "banner");
  const submit = el("button", "Submit label");
  submit.disabled = true;

  const sync = (): void => {
    submit.disabled = !form.submitEnabled;
    banner.textContent = form.banner ?? "";
  };

  root.appendChild(el("h2", `Label ${assetId}`));
  root.appendChild(banner);
  FIELD_ORDER.forEach((field: LabelField, i) => {
    const wrap = el("div", undefined, "field");
    const input = el("input");
    input.tabIndex = i + 1;
    input.placeholder = field;
    const hint = el("span", "", "hint");
    const error = el("span", "", "error");
    input.addEventListener("input", () => {
      form.setField(field, input.value);
      const options = form.suggestionsFor(field);
      hint.textContent = options.map((s) => s.token).join(" ");
      error.textContent = form.fieldErrors[field] ?? "";
      sync();
    });
    input.addEventListener("keydown", (event) => {
      const options = form.suggestionsFor(field);
      if (event.key === "Enter" && options.length === 1) {
        input.value = options[0]!.token;
        form.setField(field, input.value);
        sync();
        event.preventDefault();
      }
    });
    wrap.append(el("label", field), input, hint, error);
    root.appendChild(wrap);
  });
  const seq = el("input");
  seq.tabIndex = FIELD_ORDER.length + 1;
  seq.value = form.sequence;
  seq.addEventListener("input", () => {
    form.setSequence(seq.value);
    sync();
  });
  submit.tabIndex = FIELD_ORDER.length + 2;
  submit.addEventListener("click", () => {
    void form
      .submit(client)
      .then((asset) => {
        if (asset) toast(`${asset.asset_id} is now ${asset.status}`);
      })
      .catch(() => sync());
  });
  root.append(el("label", "sequence"), seq, submit);
}

async function renderQueue(root: HTMLElement, client: ApiClient): Promise<void> {
  const page = await client.reviewQueue("ANNOTATED");
  root.replaceChildren(el("h2", "Review queue"));
  for (const entry of queueEntries(page.items)) {
    const row = el("div", undefined, "queue-row");
    row.append(
      el("span", `${entry.assetId} ${entry.labelSummary} (${entry.votesCast} votes)`),
    );
    for (const verdict of ["APPROVE", "REJECT"] as const) {
      const button = el("button", verdict);
      button.addEventListener("click", () => {
        void castVoteIdempotent(client, { item_id: entry.assetId, verdict })
          .then((reply) => toast(voteToast(reply).text))
          .catch((err) => toast(voteErrorMessage(err)));
      });
      row.appendChild(button);
    }
    root.appendChild(row);
  }
}

function renderAtlas(root: HTMLElement, view: AtlasViewModel): void {
  root.replaceChildren(el("h2", `Atlas (${view.tileCount} stills)`));
  for (const patient of view.patients) {
    const row = el("div", undefined, "patient-row");
    row.appendChild(el("strong", patient.pseudonym));
    for (const strip of patient.strips) {
      const column = el("div", undefined, "case-strip");
      column.appendChild(el("em", strip.caseDate));
      for (const tile of strip.tiles) {
        const card = el("div", undefined, "tile");
        card.append(
          el("span", tile.badge, "badge"),
          el("span", `${tile.location} ${tile.pathology}`),
        );
        column.appendChild(card);
      }
      row.appendChild(column);
    }
    root.appendChild(row);
  }
}

async function wireAtlas(root: HTMLElement, client: ApiClient): Promise<void> {
  const search = el("input");
  search.placeholder = "search labels";
  const upload = el("input");
  upload.type = "file";
  const parseError = el("p", "", "error");
  const grid = el("div");
  root.replaceChildren(search, upload, parseError, grid);

  renderAtlas(grid, buildAtlasView(await client.atlas()));

  search.addEventListener("change", () => {
    void client.search(search.value).then((page) => {
      grid.replaceChildren(el("h2", `${page.items.length} matching stills`));
      for (const asset of page.items) {
        const label = asset.label;
        grid.appendChild(
          el("div", `${asset.asset_id} ${label?.pathology ?? ""}`, "tile"),
        );
      }
    });
  });

  upload.addEventListener("change", () => {
    const file = upload.files?.[0];
    if (!file) return;
    void file.text().then(async (text) => {
      const parsed = parseAssetIdCsv(text);
      const summary = csvErrorSummary(parsed);
      parseError.textContent = summary ?? "";
      if (summary) return;
      renderAtlas(grid, buildAtlasView(await client.atlasFilter(text)));
    });
  });
}

export async function boot(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const client = new ApiClient(
    params.get("api") ?? "http://127.0.0.1:8300",
    params.get("token") ?? "",
  );
  const vocab = await client.vocabulary();
  const nav = el("nav");
  const screen = el("main");
  document.body.append(nav, screen);
  const screens: [string, () => void | Promise<void>][] = [
    [
      "Label",
      () => renderLabelForm(screen, client, vocab, params.get("asset") ?? ""),
    ],
    ["Review", () => renderQueue(screen, client)],
    ["Atlas", () => wireAtlas(screen, client)],
  ];
  for (const [name, show] of screens) {
    const button = el("button", name);
    button.addEventListener("click", () => void show());
    nav.appendChild(button);
  }
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  void boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => void boot());
}
