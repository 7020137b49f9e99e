// Test harness: spawns the real plpgcheck language server over stdio and
// speaks LSP framing directly (the vscode-languageclient package needs a
// live editor host, which tests do not have).

import { ChildProcess, spawn } from 'node:child_process';

interface Pending {
  resolve: (v: unknown) => void;
  reject: (e: unknown) => void;
}

export class LspHarness {
  private proc: ChildProcess;
  private nextId = 0;
  private pending = new Map<number, Pending>();
  private notifications: { method: string; params: unknown }[] = [];
  private waiters: {
    method: string;
    resolve: (params: unknown) => void;
  }[] = [];
  private buffer = Buffer.alloc(0);

  constructor(command: string[] = ['python3', '-m', 'plpgcheck.cli', 'lsp']) {
    this.proc = spawn(command[0], command.slice(1), {
      stdio: ['pipe', 'pipe', 'inherit'],
    });
    this.proc.stdout!.on('data', (chunk: Buffer) => this.onData(chunk));
  }

  private onData(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    for (;;) {
      const headerEnd = this.buffer.indexOf('\r\n\r\n');
      if (headerEnd < 0) {
        return;
      }
      const header = this.buffer.subarray(0, headerEnd).toString();
      const match = /content-length:\s*(\d+)/i.exec(header);
      if (!match) {
        this.buffer = this.buffer.subarray(headerEnd + 4);
        continue;
      }
      const length = Number(match[1]);
      const bodyStart = headerEnd + 4;
      if (this.buffer.length < bodyStart + length) {
        return;
      }
      const body = this.buffer.subarray(bodyStart, bodyStart + length).toString();
      this.buffer = this.buffer.subarray(bodyStart + length);
      this.onMessage(JSON.parse(body));
    }
  }

  private onMessage(msg: {
    id?: number; method?: string; params?: unknown;
    result?: unknown; error?: { code: number; message: string };
  }): void {
    if (msg.id !== undefined && (msg.result !== undefined || msg.error)) {
      const pending = this.pending.get(msg.id);
      if (pending) {
        this.pending.delete(msg.id);
        if (msg.error) {
          pending.reject(msg.error);
        } else {
          pending.resolve(msg.result);
        }
      }
      return;
    }
    if (msg.method) {
      const idx = this.waiters.findIndex((w) => w.method === msg.method);
      if (idx >= 0) {
        const [waiter] = this.waiters.splice(idx, 1);
        waiter.resolve(msg.params);
      } else {
        this.notifications.push({ method: msg.method, params: msg.params });
      }
    }
  }

  private write(payload: object): void {
    const body = JSON.stringify(payload);
    this.proc.stdin!.write(`Content-Length: ${Buffer.byteLength(body)}\r\n\r\n${body}`);
  }

  request<T>(method: string, params: unknown): Promise<T> {
    const id = ++this.nextId;
    this.write({ jsonrpc: '2.0', id, method, params });
    return new Promise<T>((resolve, reject) => {
      this.pending.set(id, { resolve: resolve as (v: unknown) => void, reject });
    });
  }

  notify(method: string, params: unknown): void {
    this.write({ jsonrpc: '2.0', method, params });
  }

  waitNotification<T>(method: string): Promise<T> {
    const idx = this.notifications.findIndex((n) => n.method === method);
    if (idx >= 0) {
      const [n] = this.notifications.splice(idx, 1);
      return Promise.resolve(n.params as T);
    }
    return new Promise<T>((resolve) => {
      this.waiters.push({ method, resolve: resolve as (p: unknown) => void });
    });
  }

  async initialize(options: object = {}): Promise<unknown> {
    const result = await this.request('initialize', {
      processId: process.pid,
      rootUri: null,
      capabilities: {},
      initializationOptions: options,
    });
    this.notify('initialized', {});
    return result;
  }

  openDocument(uri: string, text: string, version = 1): void {
    this.notify('textDocument/didOpen', {
      textDocument: { uri, languageId: 'plpgsql', version, text },
    });
  }

  changeDocument(uri: string, text: string, version: number): void {
    this.notify('textDocument/didChange', {
      textDocument: { uri, version },
      contentChanges: [{ text }],
    });
  }

  async shutdown(): Promise<void> {
    try {
      await this.request('shutdown', null);
      this.notify('exit', {});
    } finally {
      setTimeout(() => this.proc.kill(), 500);
    }
  }
}

export interface PublishDiagnosticsParams {
  uri: string;
  version?: number;
  diagnostics: {
    range: {
      start: { line: number; character: number };
      end: { line: number; character: number };
    };
    severity: number;
    code: string;
    source: string;
    message: string;
  }[];
}
