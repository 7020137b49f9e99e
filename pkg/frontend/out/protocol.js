"use strict";
// Custom LSP methods exposed by the plpgcheck language server, mirrored
// from the server's documented contract. The extension contains no
// analysis logic of its own; everything flows through these requests.
Object.defineProperty(exports, "__esModule", { value: true });
exports.ERR_BAD_INPUT = exports.ERR_CONNECTION = exports.ERR_STALE_VERSION = exports.ERR_CONFIG_REQUIRED = exports.INSPECT_SIGNATURES = exports.INSPECT_DYNAMIC = void 0;
exports.INSPECT_DYNAMIC = 'inspect/dynamic';
exports.INSPECT_SIGNATURES = 'inspect/signatures';
// Server error codes for inspect/dynamic.
exports.ERR_CONFIG_REQUIRED = -32001;
exports.ERR_STALE_VERSION = -32002;
exports.ERR_CONNECTION = -32003;
exports.ERR_BAD_INPUT = -32010;
//# sourceMappingURL=protocol.js.map