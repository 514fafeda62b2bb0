/** Review queue: browse items awaiting votes and cast verdicts.
 *
 * The queue itself is a server view (status-filtered, undecided items
 * only); this module shapes it for display and wraps vote submission in
 * an idempotent retry: one logical vote carries one request id, so a
 * resend after a dropped reply replays the stored response instead of
 * voting twice. Server rejections (duplicate vote, stale status) are
 * surfaced, never retried.
 */

import { ApiRequestError, newRequestId } from "./client.js";
import type { ApiClient } from "./client.js";
import type { ReviewQueueItem, VoteReply, VoteSubmission } from "./types.js";

export interface QueueEntry {
  assetId: string;
  caseId: string;
  status: string;
  labelSummary: string;
  votesCast: number;
}

export function queueEntries(items: readonly ReviewQueueItem[]): QueueEntry[] {
  return items.map((item) => ({
    assetId: item.asset_id,
    caseId: item.asset.case_id,
    status: item.asset.status,
    labelSummary: summarizeLabel(item),
    votesCast: item.votes.length,
  }));
}

function summarizeLabel(item: ReviewQueueItem): string {
  const label = item.asset.label;
  if (!label || !label.modality) return "unlabeled";
  return [label.modality, label.location, label.pathology]
    .filter(Boolean)
    .join(" ");
}

export type VoteToast =
  | { kind: "decision"; text: string }
  | { kind: "pending"; text: string };

export function voteToast(reply: VoteReply): VoteToast {
  if (reply.decision) {
    return {
      kind: "decision",
      text: `${reply.decision.outcome} (${reply.decision.decided_by})`,
    };
  }
  return {
    kind: "pending",
    text: `vote recorded, ${reply.votes_cast} cast so far`,
  };
}

/** Cast one vote, retrying transport failures with the same request id.
 *
 * Only errors from the transport itself (a rejected fetch) are retried;
 * an ApiRequestError means the server answered and retrying would not
 * change its mind.
 */
export async function castVoteIdempotent(
  client: ApiClient,
  submission: VoteSubmission,
  maxAttempts = 3,
): Promise<VoteReply> {
  const body: VoteSubmission = {
    ...submission,
    request_id: submission.request_id ?? newRequestId(),
  };
  let lastError: unknown;
  for (let attempt = 0; attempt < maxAttempts; attempt += 1) {
    try {
      return await client.castVote(body);
    } catch (err) {
      if (err instanceof ApiRequestError) throw err;
      lastError = err;
    }
  }
  throw lastError;
}

/** Human phrasing for a rejected vote. */
export function voteErrorMessage(err: unknown): string {
  if (err instanceof ApiRequestError) {
    if (err.code === "DUPLICATE_VOTE") return err.detail;
    return `${err.code}: ${err.detail}`;
  }
  return err instanceof Error ? err.message : String(err);
}
