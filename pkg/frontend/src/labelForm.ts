/** State for the guided image labeling form.
 *
 * Four autocomplete inputs (modality, location, pathology, grade) plus a
 * sequence number. Every selectable token comes from the vocabulary
 * endpoint: the pathology and grade lists are derived by splitting the
 * server's composite pathology tokens (e.g. "TA-HG" -> stem "TA", grade
 * "HG"), and a composition is valid only when the rejoined token is
 * itself in the server's list, so "BEN" + "HG" can never be submitted.
 * Submit stays disabled until every field holds a vocabulary-valid value.
 */

import { ApiRequestError, newRequestId } from "./client.js";
import type { ApiClient } from "./client.js";
import { canonicalize, suggest } from "./autocomplete.js";
import type { Suggestion } from "./autocomplete.js";
import type { AssetPayload, LabelSubmission, VocabularyResponse } from "./types.js";

export type LabelField = "modality" | "location" | "pathology" | "grade";

export const FIELD_ORDER: readonly LabelField[] = [
  "modality",
  "location",
  "pathology",
  "grade",
];

const NO_GRADE = "";

export class LabelFormState {
  readonly assetId: string;
  private readonly modalities: string[];
  private readonly locations: string[];
  private readonly pathologyTokens: string[];
  private readonly stems: string[];
  private readonly grades: string[];

  private values: Record<LabelField, string> = {
    modality: "",
    location: "",
    pathology: "",
    grade: NO_GRADE,
  };
  private sequenceText = "1";

  /** Per-field messages from a rejected submission. */
  fieldErrors: Partial<Record<LabelField | "sequence", string>> = {};
  /** Non-field failure, e.g. the asset moved on while the form was open. */
  banner: string | null = null;
  /** Kept across retries of one submission so the server can replay. */
  private pendingRequestId: string | null = null;

  constructor(vocab: VocabularyResponse, assetId: string) {
    this.assetId = assetId;
    this.modalities = [...vocab.vocabulary.modality];
    this.locations = [...vocab.vocabulary.location];
    this.pathologyTokens = [...vocab.vocabulary.pathology];
    const stems = new Set<string>();
    const grades = new Set<string>();
    for (const token of this.pathologyTokens) {
      const [stem, grade] = splitPathology(token);
      stems.add(stem);
      if (grade !== NO_GRADE) grades.add(grade);
    }
    this.stems = [...stems];
    this.grades = [...grades];
  }

  value(field: LabelField): string {
    return this.values[field];
  }

  get sequence(): string {
    return this.sequenceText;
  }

  setField(field: LabelField, text: string): void {
    this.values[field] = text;
    delete this.fieldErrors[field];
    if (field === "pathology") delete this.fieldErrors.grade;
    this.banner = null;
  }

  setSequence(text: string): void {
    this.sequenceText = text;
    delete this.fieldErrors.sequence;
  }

  suggestionsFor(field: LabelField): Suggestion[] {
    return suggest(this.optionsFor(field), this.values[field]);
  }

  private optionsFor(field: LabelField): string[] {
    switch (field) {
      case "modality":
        return this.modalities;
      case "location":
        return this.locations;
      case "pathology":
        return this.stems;
      case "grade":
        // Only grades that actually combine with the chosen stem.
        return this.grades.filter((g) =>
          this.pathologyTokens.includes(joinPathology(this.stemOrText(), g)),
        );
    }
  }

  private stemOrText(): string {
    return canonicalize(this.stems, this.values.pathology) ?? this.values.pathology;
  }

  /** The composite wire token, or null while the combination is invalid. */
  composedPathology(): string | null {
    const stem = canonicalize(this.stems, this.values.pathology);
    if (stem === null) return null;
    const gradeText = this.values.grade.trim();
    const grade = gradeText === NO_GRADE ? NO_GRADE : canonicalize(this.grades, gradeText);
    if (grade === null) return null;
    const token = joinPathology(stem, grade);
    return this.pathologyTokens.includes(token) ? token : null;
  }

  fieldValid(field: LabelField): boolean {
    switch (field) {
      case "modality":
        return canonicalize(this.modalities, this.values.modality) !== null;
      case "location":
        return canonicalize(this.locations, this.values.location) !== null;
      case "pathology":
      case "grade":
        return this.composedPathology() !== null;
    }
  }

  sequenceValid(): boolean {
    const n = Number(this.sequenceText.trim());
    return Number.isInteger(n) && n >= 1 && n <= 99;
  }

  get submitEnabled(): boolean {
    return FIELD_ORDER.every((f) => this.fieldValid(f)) && this.sequenceValid();
  }

  /** The exact request body a submission would carry, or null if invalid. */
  submission(): LabelSubmission | null {
    if (!this.submitEnabled) return null;
    this.pendingRequestId ??= newRequestId();
    return {
      asset_id: this.assetId,
      modality: canonicalize(this.modalities, this.values.modality)!,
      location: canonicalize(this.locations, this.values.location)!,
      pathology: this.composedPathology()!,
      sequence: Number(this.sequenceText.trim()),
      request_id: this.pendingRequestId,
    };
  }

  /** Submit; on success the request id is retired and errors cleared.
   *
   * On failure the id survives, so calling submit again retries the same
   * logical request and the server's replay path prevents double effects.
   */
  async submit(client: ApiClient): Promise<AssetPayload | null> {
    const body = this.submission();
    if (body === null) return null;
    try {
      const reply = await client.submitLabel(body);
      this.pendingRequestId = null;
      this.fieldErrors = {};
      this.banner = null;
      return reply.asset;
    } catch (err) {
      this.applyServerError(err);
      throw err;
    }
  }

  /** Route a rejected submission to inline field errors or the banner. */
  applyServerError(err: unknown): void {
    if (!(err instanceof ApiRequestError)) {
      this.banner = err instanceof Error ? err.message : String(err);
      return;
    }
    if (err.code === "ILLEGAL_TRANSITION") {
      this.banner = err.detail;
      return;
    }
    if (err.code === "UNKNOWN_VOCAB") {
      const match = /^unknown (\w+) token/.exec(err.detail);
      const domain = match?.[1];
      if (domain === "modality" || domain === "location") {
        this.fieldErrors[domain] = err.detail;
        return;
      }
      if (domain === "pathology") {
        this.fieldErrors.pathology = err.detail;
        return;
      }
    }
    if (err.code === "VALIDATION") {
      // Pydantic-style "field: message; field: message" details.
      let routed = false;
      for (const part of err.detail.split("; ")) {
        const [field, ...rest] = part.split(": ");
        if (
          field === "modality" ||
          field === "location" ||
          field === "pathology" ||
          field === "sequence"
        ) {
          this.fieldErrors[field] = rest.join(": ") || part;
          routed = true;
        }
      }
      if (routed) return;
    }
    this.banner = err.detail;
  }
}

function splitPathology(token: string): [string, string] {
  const dash = token.indexOf("-");
  return dash < 0 ? [token, NO_GRADE] : [token.slice(0, dash), token.slice(dash + 1)];
}

function joinPathology(stem: string, grade: string): string {
  return grade === NO_GRADE ? stem : `${stem}-${grade}`;
}
