/**
 * Local label validation against the codebook served by the backend.
 *
 * The UI never invents labels: every selectable id comes from the served
 * codebook, and a form is checked here before any request leaves the
 * browser (a null label is always legal - it means "no association").
 */

import type { Channel, Codebook, ResolutionForm } from "./types.js";

const CHANNELS: Channel[] = ["semantic", "phonetic", "visual"];

export function categoriesFor(codebook: Codebook, channel: Channel) {
  return codebook.categories.filter((c) => c.channel === channel);
}

export function validateLabels(
  codebook: Codebook,
  labels: Record<string, string | null>,
): string[] {
  const errors: string[] = [];
  const byId = new Map(codebook.categories.map((c) => [c.id, c]));
  for (const [channel, label] of Object.entries(labels)) {
    if (!CHANNELS.includes(channel as Channel)) {
      errors.push(`unknown channel "${channel}"`);
      continue;
    }
    if (label === null) continue;
    const category = byId.get(label);
    if (!category) {
      errors.push(`unknown label "${label}" for channel ${channel}`);
    } else if (category.channel !== channel) {
      errors.push(`label ${label} belongs to channel ${category.channel}, not ${channel}`);
    }
  }
  return errors;
}

export function validateForm(codebook: Codebook, form: ResolutionForm): string[] {
  const errors = validateLabels(codebook, form.final_labels);
  if (!form.reviewer_id.trim()) errors.push("reviewer id is required");
  if (form.final_name !== null && form.final_name.trim() === "") {
    errors.push("name must be null or non-empty");
  }
  return errors;
}
