// Custom LSP methods exposed by the plpgcheck language server, mirrored
// from the server's documented contract. The extension contains no
// analysis logic of its own; everything flows through these requests.

export const INSPECT_DYNAMIC = 'inspect/dynamic';
export const INSPECT_SIGNATURES = 'inspect/signatures';

export interface SignatureParam {
  name: string;
  type: string;
}

export interface FunctionSignature {
  name: string;
  params: SignatureParam[];
  returns: string;
}

export interface InspectDynamicParams {
  uri: string;
  version?: number;
  function: string;
  args: (string | null)[];
  setupSql?: string[];
}

export interface ReportSpan {
  file: string;
  start_line: number;
  start_col: number;
  end_line: number;
  end_col: number;
}

export interface InconsistencyReport {
  kind: string;
  channel: string | null;
  category: string;
  severity: string;
  pattern_id: string | null;
  suggestion: string;
  plsql_evidence: string | null;
  sql_evidence: string | null;
  span: ReportSpan;
}

export interface OutcomeJson {
  status: string;
  notices: string[];
  exec_cmds: string[];
  error: { sqlstate: string; message: string } | null;
}

export interface InspectionResultJson {
  schema: string;
  verdict: string;
  problem: string | null;
  reports: InconsistencyReport[];
  outcomes: { plsql: OutcomeJson | null; sql: OutcomeJson | null };
  fingerprint: Record<string, unknown> | null;
  timings_ms: Record<string, number>;
}

// Server error codes for inspect/dynamic.
export const ERR_CONFIG_REQUIRED = -32001;
export const ERR_STALE_VERSION = -32002;
export const ERR_CONNECTION = -32003;
export const ERR_BAD_INPUT = -32010;
