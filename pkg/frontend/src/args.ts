// Parameter serialization shared with the CLI: a panel submission must
// produce exactly what `plpgcheck run --args` would. The literal token
// NULL means SQL NULL; everything else travels as text.

export function serializeArgs(values: string[]): (string | null)[] {
  return values.map((v) => (v === 'NULL' ? null : v));
}
