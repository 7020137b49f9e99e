"use strict";
// Webview panel controller: wires the pure panel state to the vscode
// webview and the language client. One in-flight inspection at a time.
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
exports.InspectionPanel = void 0;
const vscode = __importStar(require("vscode"));
const args_1 = require("./args");
const panelState_1 = require("./panelState");
const protocol_1 = require("./protocol");
class InspectionPanel {
    panel;
    client;
    documentUri;
    documentVersion;
    static current;
    state = (0, panelState_1.initialState)();
    disposables = [];
    constructor(panel, client, documentUri, documentVersion) {
        this.panel = panel;
        this.client = client;
        this.documentUri = documentUri;
        this.documentVersion = documentVersion;
        this.panel.onDidDispose(() => this.dispose(), null, this.disposables);
        this.panel.webview.onDidReceiveMessage((msg) => this.onMessage(msg), null, this.disposables);
    }
    static async open(client, editor) {
        if (InspectionPanel.current) {
            InspectionPanel.current.panel.reveal();
            await InspectionPanel.current.attach(editor);
            return InspectionPanel.current;
        }
        const panel = vscode.window.createWebviewPanel('plpgcheckInspect', 'plpgcheck: dynamic inspection', vscode.ViewColumn.Beside, { enableScripts: true });
        const instance = new InspectionPanel(panel, client, editor.document.uri.toString(), editor.document.version);
        InspectionPanel.current = instance;
        await instance.attach(editor);
        return instance;
    }
    async attach(editor) {
        this.documentUri = editor.document.uri.toString();
        this.documentVersion = editor.document.version;
        await this.refreshSignatures();
    }
    async refreshSignatures() {
        try {
            const signatures = await this.client.sendRequest(protocol_1.INSPECT_SIGNATURES, { uri: this.documentUri });
            this.state = (0, panelState_1.withSignatures)(this.state, signatures);
        }
        catch (err) {
            this.state = (0, panelState_1.withError)(this.state, String(err));
        }
        this.render();
    }
    async onMessage(msg) {
        if (msg.kind === 'select' && msg.name) {
            this.state = (0, panelState_1.selectFunction)(this.state, msg.name);
            this.render();
        }
        else if (msg.kind === 'value' && msg.index !== undefined) {
            this.state = (0, panelState_1.setValue)(this.state, msg.index, msg.value ?? '');
        }
        else if (msg.kind === 'submit' && msg.values) {
            await this.submit(msg.values);
        }
    }
    async submit(values) {
        const selected = this.state.selected;
        if (this.state.busy || !selected) {
            return undefined;
        }
        this.state = (0, panelState_1.startInspection)(this.state);
        this.render();
        const params = {
            uri: this.documentUri,
            version: this.documentVersion,
            function: selected,
            args: (0, args_1.serializeArgs)(values),
        };
        try {
            const result = await this.client.sendRequest(protocol_1.INSPECT_DYNAMIC, params);
            this.state = (0, panelState_1.withResult)(this.state, result);
            this.render();
            return result;
        }
        catch (err) {
            this.state = (0, panelState_1.withError)(this.state, messageOf(err));
            this.render();
            return undefined;
        }
    }
    snapshot() {
        return this.state;
    }
    render() {
        this.panel.webview.html = (0, panelState_1.renderHtml)(this.state);
    }
    dispose() {
        InspectionPanel.current = undefined;
        this.panel.dispose();
        for (const d of this.disposables.splice(0)) {
            d.dispose();
        }
    }
}
exports.InspectionPanel = InspectionPanel;
function messageOf(err) {
    if (err && typeof err === 'object' && 'message' in err) {
        return String(err.message);
    }
    return String(err);
}
//# sourceMappingURL=panel.js.map