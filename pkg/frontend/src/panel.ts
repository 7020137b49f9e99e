// Webview panel controller: wires the pure panel state to the vscode
// webview and the language client. One in-flight inspection at a time.

import * as vscode from 'vscode';
import { serializeArgs } from './args';
import {
  initialState,
  PanelState,
  renderHtml,
  selectFunction,
  setValue,
  startInspection,
  withError,
  withResult,
  withSignatures,
} from './panelState';
import {
  FunctionSignature,
  INSPECT_DYNAMIC,
  INSPECT_SIGNATURES,
  InspectDynamicParams,
  InspectionResultJson,
} from './protocol';

export interface ServerRequester {
  sendRequest<T>(method: string, params: unknown): Promise<T>;
}

export class InspectionPanel {
  static current: InspectionPanel | undefined;

  private state: PanelState = initialState();
  private disposables: vscode.Disposable[] = [];

  private constructor(
    private readonly panel: vscode.WebviewPanel,
    private readonly client: ServerRequester,
    private documentUri: string,
    private documentVersion: number,
  ) {
    this.panel.onDidDispose(() => this.dispose(), null, this.disposables);
    this.panel.webview.onDidReceiveMessage(
      (msg) => this.onMessage(msg), null, this.disposables);
  }

  static async open(client: ServerRequester,
                    editor: vscode.TextEditor): Promise<InspectionPanel> {
    if (InspectionPanel.current) {
      InspectionPanel.current.panel.reveal();
      await InspectionPanel.current.attach(editor);
      return InspectionPanel.current;
    }
    const panel = vscode.window.createWebviewPanel(
      'plpgcheckInspect',
      'plpgcheck: dynamic inspection',
      vscode.ViewColumn.Beside,
      { enableScripts: true },
    );
    const instance = new InspectionPanel(
      panel, client, editor.document.uri.toString(), editor.document.version);
    InspectionPanel.current = instance;
    await instance.attach(editor);
    return instance;
  }

  async attach(editor: vscode.TextEditor): Promise<void> {
    this.documentUri = editor.document.uri.toString();
    this.documentVersion = editor.document.version;
    await this.refreshSignatures();
  }

  async refreshSignatures(): Promise<void> {
    try {
      const signatures = await this.client.sendRequest<FunctionSignature[]>(
        INSPECT_SIGNATURES, { uri: this.documentUri });
      this.state = withSignatures(this.state, signatures);
    } catch (err) {
      this.state = withError(this.state, String(err));
    }
    this.render();
  }

  private async onMessage(msg: {
    kind: string; values?: string[]; name?: string;
    index?: number; value?: string;
  }): Promise<void> {
    if (msg.kind === 'select' && msg.name) {
      this.state = selectFunction(this.state, msg.name);
      this.render();
    } else if (msg.kind === 'value' && msg.index !== undefined) {
      this.state = setValue(this.state, msg.index, msg.value ?? '');
    } else if (msg.kind === 'submit' && msg.values) {
      await this.submit(msg.values);
    }
  }

  async submit(values: string[]): Promise<InspectionResultJson | undefined> {
    const selected = this.state.selected;
    if (this.state.busy || !selected) {
      return undefined;
    }
    this.state = startInspection(this.state);
    this.render();
    const params: InspectDynamicParams = {
      uri: this.documentUri,
      version: this.documentVersion,
      function: selected,
      args: serializeArgs(values),
    };
    try {
      const result = await this.client.sendRequest<InspectionResultJson>(
        INSPECT_DYNAMIC, params);
      this.state = withResult(this.state, result);
      this.render();
      return result;
    } catch (err) {
      this.state = withError(this.state, messageOf(err));
      this.render();
      return undefined;
    }
  }

  snapshot(): PanelState {
    return this.state;
  }

  private render(): void {
    this.panel.webview.html = renderHtml(this.state);
  }

  dispose(): void {
    InspectionPanel.current = undefined;
    this.panel.dispose();
    for (const d of this.disposables.splice(0)) {
      d.dispose();
    }
  }
}

function messageOf(err: unknown): string {
  if (err && typeof err === 'object' && 'message' in err) {
    return String((err as { message: unknown }).message);
  }
  return String(err);
}
