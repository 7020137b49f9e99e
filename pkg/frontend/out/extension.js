"use strict";
// Thin editor client: launches the plpgcheck language server, surfaces its
// diagnostics and quick fixes through the native LSP integration, and adds
// the dynamic-inspection panel. All analysis happens server-side.
var __createBinding = (this && this.__createBinding) || (Object.create ? (function(o, m, k, k2) {
    if (k2 === undefined) k2 = k;
    var desc = Object.getOwnPropertyDescriptor(m, k);
    if (!desc || ("get" in desc ? !m.__esModule : desc.writable || desc.configurable)) {
      desc = { enumerable: true, get: function() { return m[k]; } };
    }
    Object.defineProperty(o, k2, desc);
}) : (function(o, m, k, k2) {
    if (k2 === undefined) k2 = k;
    o[k2] = m[k];
}));
var __setModuleDefault = (this && this.__setModuleDefault) || (Object.create ? (function(o, v) {
    Object.defineProperty(o, "default", { enumerable: true, value: v });
}) : function(o, v) {
    o["default"] = v;
});
var __importStar = (this && this.__importStar) || (function () {
    var ownKeys = function(o) {
        ownKeys = Object.getOwnPropertyNames || function (o) {
            var ar = [];
            for (var k in o) if (Object.prototype.hasOwnProperty.call(o, k)) ar[ar.length] = k;
            return ar;
        };
        return ownKeys(o);
    };
    return function (mod) {
        if (mod && mod.__esModule) return mod;
        var result = {};
        if (mod != null) for (var k = ownKeys(mod), i = 0; i < k.length; i++) if (k[i] !== "default") __createBinding(result, mod, k[i]);
        __setModuleDefault(result, mod);
        return result;
    };
})();
Object.defineProperty(exports, "__esModule", { value: true });
exports.serverCommand = serverCommand;
exports.activate = activate;
exports.deactivate = deactivate;
const vscode = __importStar(require("vscode"));
const node_1 = require("vscode-languageclient/node");
const panel_1 = require("./panel");
let client;
function serverCommand(config) {
    const command = config.get('serverCommand');
    return command && command.length > 0 ? command : ['plpgcheck', 'lsp'];
}
async function activate(context) {
    const config = vscode.workspace.getConfiguration('plpgcheck');
    const command = serverCommand(config);
    const serverOptions = {
        command: command[0],
        args: command.slice(1),
    };
    const clientOptions = {
        documentSelector: [
            { scheme: 'file', language: 'sql' },
            { scheme: 'file', language: 'plpgsql' },
            { scheme: 'file', pattern: '**/*.{sql,plsql}' },
        ],
        initializationOptions: {
            dsn: config.get('dsn') || null,
            timeoutMs: config.get('timeoutMs') ?? 5000,
            fuel: config.get('fuel') ?? 100000,
        },
        synchronize: {
            configurationSection: 'plpgcheck',
        },
    };
    client = new node_1.LanguageClient('plpgcheck', 'plpgcheck', serverOptions, clientOptions);
    try {
        await client.start();
    }
    catch (err) {
        void vscode.window.showErrorMessage(`plpgcheck: could not start the language server (${command.join(' ')}). ` +
            `Install the plpgcheck package or set plpgcheck.serverCommand. ${err}`);
        client = undefined;
        return;
    }
    context.subscriptions.push({ dispose: () => void client?.stop() });
    context.subscriptions.push(vscode.commands.registerCommand('plpgcheck.openInspectionPanel', async () => {
        const editor = vscode.window.activeTextEditor;
        if (!editor || !client) {
            void vscode.window.showErrorMessage('plpgcheck: open a PL/pgSQL file first.');
            return;
        }
        await panel_1.InspectionPanel.open(client, editor);
    }));
}
function deactivate() {
    return client?.stop();
}
//# sourceMappingURL=extension.js.map