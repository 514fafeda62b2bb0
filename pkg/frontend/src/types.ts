/** Wire types for the curation service API.
 *
 * Every response carries an `access` grade. Below CONFIDENTIAL the server
 * drops identifying fields (`uid`, `path`) entirely, so their absence is
 * the signal that a view must not try to render them.
 */

export type AccessGrade = "PUBLIC" | "INTERNAL" | "CONFIDENTIAL" | "RESTRICTED";

export type CompletionStatus =
  | "NEW"
  | "LABELED"
  | "QC1_PASS"
  | "QC2_PASS"
  | "ANNOTATED"
  | "QC3_PASS"
  | "RELEASED"
  | "EXCLUDED";

export type MediaKind = "IMAGE" | "VIDEO";

export type Verdict = "APPROVE" | "REJECT";

/** GET /vocab -> token lists per domain. The UI never invents tokens. */
export interface VocabularyResponse {
  access: AccessGrade;
  vocabulary: {
    modality: string[];
    location: string[];
    pathology: string[];
    status: string[];
    procedure: string[];
    appearance: string[];
    verdict: string[];
    root_cause: string[];
  };
}

export interface LabelPayload {
  case_date: string;
  modality?: string;
  location?: string;
  pathology?: string;
  sequence?: number;
  uid?: string;
}

export interface AssetPayload {
  asset_id: string;
  case_id: string;
  kind: MediaKind;
  status: CompletionStatus;
  byte_size: number;
  checksum: string;
  created_at: string;
  modified_at: string;
  deleted: boolean;
  label: LabelPayload | null;
  access: AccessGrade;
  frame_count?: number;
  width?: number;
  height?: number;
  uid?: string;
  path?: string;
}

export interface Page<T> {
  items: T[];
  next_cursor: string | null;
  access: AccessGrade;
}

export interface LabelSubmission {
  asset_id: string;
  modality: string;
  location: string;
  pathology: string;
  sequence: number;
  request_id?: string;
}

export interface VotePayload {
  reviewer_id: string;
  role: string;
  verdict: Verdict;
  root_cause: string | null;
  note: string;
}

export interface DecisionPayload {
  outcome: string;
  decided_by: string;
  [extra: string]: unknown;
}

export interface ReviewQueueItem {
  asset_id: string;
  asset: AssetPayload;
  votes: VotePayload[];
  decision: DecisionPayload | null;
}

export interface VoteSubmission {
  item_id: string;
  verdict: Verdict;
  root_cause?: string | null;
  note?: string;
  request_id?: string;
}

export interface VoteReply {
  access: AccessGrade;
  item_id: string;
  pending: boolean;
  votes_cast: number;
  decision: DecisionPayload | null;
}

/** One de-identified atlas still. `ref` is the pseudonymous filename. */
export interface AtlasImage {
  pseudonym: string;
  case_date: string;
  modality: string;
  location: string;
  pathology: string;
  ref: string;
}

/** One patient's strip; images arrive newest case first. */
export interface AtlasPatient {
  pseudonym: string;
  images: AtlasImage[];
}

export interface AtlasManifest {
  bundle_id: string;
  purpose: string;
  items: AtlasPatient[];
  curation_date: string;
  modification_date: string;
  license: string;
  provenance: string;
}

export interface AtlasResponse {
  access: AccessGrade;
  manifest: AtlasManifest;
  requested?: number;
  skipped?: { asset_id: string; reason: string }[];
}

/** Every failure is JSON {code, detail} with an HTTP status. */
export interface ApiErrorBody {
  code: string;
  detail: string;
}
