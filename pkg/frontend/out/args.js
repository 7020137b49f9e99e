"use strict";
// Parameter serialization shared with the CLI: a panel submission must
// produce exactly what `plpgcheck run --args` would. The literal token
// NULL means SQL NULL; everything else travels as text.
Object.defineProperty(exports, "__esModule", { value: true });
exports.serializeArgs = serializeArgs;
function serializeArgs(values) {
    return values.map((v) => (v === 'NULL' ? null : v));
}
//# sourceMappingURL=args.js.map