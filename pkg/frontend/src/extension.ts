// Thin editor client: launches the plpgcheck language server, surfaces its
// diagnostics and quick fixes through the native LSP integration, and adds
// the dynamic-inspection panel. All analysis happens server-side.

import * as vscode from 'vscode';
import {
  LanguageClient,
  LanguageClientOptions,
  ServerOptions,
} from 'vscode-languageclient/node';
import { InspectionPanel } from './panel';

let client: LanguageClient | undefined;

export function serverCommand(config: vscode.WorkspaceConfiguration): string[] {
  const command = config.get<string[]>('serverCommand');
  return command && command.length > 0 ? command : ['plpgcheck', 'lsp'];
}

export async function activate(context: vscode.ExtensionContext): Promise<void> {
  const config = vscode.workspace.getConfiguration('plpgcheck');
  const command = serverCommand(config);

  const serverOptions: ServerOptions = {
    command: command[0],
    args: command.slice(1),
  };
  const clientOptions: LanguageClientOptions = {
    documentSelector: [
      { scheme: 'file', language: 'sql' },
      { scheme: 'file', language: 'plpgsql' },
      { scheme: 'file', pattern: '**/*.{sql,plsql}' },
    ],
    initializationOptions: {
      dsn: config.get<string>('dsn') || null,
      timeoutMs: config.get<number>('timeoutMs') ?? 5000,
      fuel: config.get<number>('fuel') ?? 100000,
    },
    synchronize: {
      configurationSection: 'plpgcheck',
    },
  };

  client = new LanguageClient('plpgcheck', 'plpgcheck', serverOptions, clientOptions);
  try {
    await client.start();
  } catch (err) {
    void vscode.window.showErrorMessage(
      `plpgcheck: could not start the language server (${command.join(' ')}). ` +
      `Install the plpgcheck package or set plpgcheck.serverCommand. ${err}`);
    client = undefined;
    return;
  }
  context.subscriptions.push({ dispose: () => void client?.stop() });

  context.subscriptions.push(vscode.commands.registerCommand(
    'plpgcheck.openInspectionPanel', async () => {
      const editor = vscode.window.activeTextEditor;
      if (!editor || !client) {
        void vscode.window.showErrorMessage(
          'plpgcheck: open a PL/pgSQL file first.');
        return;
      }
      await InspectionPanel.open(client, editor);
    }));
}

export function deactivate(): Thenable<void> | undefined {
  return client?.stop();
}
