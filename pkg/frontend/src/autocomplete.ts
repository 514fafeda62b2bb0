/** Prefix autocomplete over server-supplied token lists.
 *
 * Suggestions are always a subset of the tokens handed in; the UI never
 * fabricates vocabulary. Matching is case-insensitive so "tr" finds
 * "TRIG", but the suggestion returned is the server's exact spelling.
 */

export interface Suggestion {
  token: string;
  /** True when the typed text equals the token (ignoring case). */
  exact: boolean;
}

export function suggest(tokens: readonly string[], typed: string): Suggestion[] {
  const needle = typed.trim().toUpperCase();
  if (!needle) {
    return tokens.map((token) => ({ token, exact: false }));
  }
  return tokens
    .filter((token) => token.toUpperCase().startsWith(needle))
    .map((token) => ({ token, exact: token.toUpperCase() === needle }));
}

/** The canonical spelling if `typed` names a known token, else null. */
export function canonicalize(tokens: readonly string[], typed: string): string | null {
  const needle = typed.trim().toUpperCase();
  for (const token of tokens) {
    if (token.toUpperCase() === needle) return token;
  }
  return null;
}
