"use strict";
// Pure panel model: no vscode imports, fully unit-testable. The webview is
// a thin renderer over this state.
Object.defineProperty(exports, "__esModule", { value: true });
exports.initialState = initialState;
exports.withSignatures = withSignatures;
exports.selectFunction = selectFunction;
exports.setValue = setValue;
exports.startInspection = startInspection;
exports.withResult = withResult;
exports.withError = withError;
exports.evidenceRows = evidenceRows;
exports.renderHtml = renderHtml;
function initialState() {
    return {
        functions: [],
        selected: null,
        rows: [],
        lastVerdict: null,
        lastResult: null,
        error: null,
        busy: false,
    };
}
function rowsFor(params, previous) {
    // keep entered values for rows whose (name, type) is unchanged
    return params.map((p, i) => {
        const prior = previous[i];
        const keep = prior && prior.name === p.name && prior.declaredType === p.type;
        return { name: p.name, declaredType: p.type, value: keep ? prior.value : '' };
    });
}
function withSignatures(state, functions) {
    const selected = functions.find((f) => f.name === state.selected)?.name ??
        functions[0]?.name ?? null;
    const signature = functions.find((f) => f.name === selected);
    const rows = signature ? rowsFor(signature.params, state.rows) : [];
    return { ...state, functions, selected, rows };
}
function selectFunction(state, name) {
    const signature = state.functions.find((f) => f.name === name);
    if (!signature) {
        return state;
    }
    // parameter rows regenerate whenever the selected signature changes
    const rows = name === state.selected ? state.rows : rowsFor(signature.params, []);
    return { ...state, selected: name, rows };
}
function setValue(state, index, value) {
    const rows = state.rows.map((r, i) => (i === index ? { ...r, value } : r));
    return { ...state, rows };
}
function startInspection(state) {
    return { ...state, busy: true, error: null };
}
function withResult(state, result) {
    return {
        ...state,
        busy: false,
        lastVerdict: result.verdict,
        lastResult: result,
        error: null,
    };
}
function withError(state, message) {
    // inputs are preserved on errors so the user can retry
    return { ...state, busy: false, error: message };
}
function evidenceRows(result) {
    return result.reports.map((r) => ({
        channel: r.channel ?? 'unknown',
        plsql: r.plsql_evidence ?? '',
        sql: r.sql_evidence ?? '',
    }));
}
function renderHtml(state) {
    const options = state.functions
        .map((f) => {
        const sel = f.name === state.selected ? ' selected' : '';
        return `<option value="${escapeHtml(f.name)}"${sel}>${escapeHtml(f.name)}</option>`;
    })
        .join('');
    const rows = state.rows
        .map((r, i) => `
      <tr>
        <td><code>${escapeHtml(r.name)}</code></td>
        <td>${escapeHtml(r.declaredType)}</td>
        <td><input data-index="${i}" value="${escapeHtml(r.value)}" /></td>
      </tr>`)
        .join('');
    let banner = '';
    if (state.error) {
        banner = `<div class="banner error-banner">Error: ${escapeHtml(state.error)}</div>`;
    }
    else if (state.lastVerdict === 'inconsistent') {
        banner = '<div class="banner inconsistent">INCONSISTENT</div>';
    }
    else if (state.lastVerdict === 'consistent') {
        banner = '<div class="banner consistent">CONSISTENT</div>';
    }
    else if (state.lastVerdict === 'inconclusive') {
        banner = '<div class="banner inconclusive">INCONCLUSIVE</div>';
    }
    let evidence = '';
    if (state.lastResult && state.lastResult.reports.length > 0) {
        const body = evidenceRows(state.lastResult)
            .map((e) => `
        <tr>
          <td>${escapeHtml(e.channel)}</td>
          <td><pre>${escapeHtml(e.plsql)}</pre></td>
          <td><pre>${escapeHtml(e.sql)}</pre></td>
        </tr>`)
            .join('');
        evidence = `
      <table class="evidence">
        <tr><th>channel</th><th>PL/pgSQL engine</th><th>equivalent SQL</th></tr>
        ${body}
      </table>`;
    }
    return `<!DOCTYPE html>
<html>
<head>
<meta charset="UTF-8">
<style>
  body { font-family: var(--vscode-font-family, sans-serif); padding: 0.6em; }
  table { border-collapse: collapse; margin: 0.6em 0; }
  td, th { border: 1px solid var(--vscode-panel-border, #888); padding: 0.3em 0.6em; }
  .banner { padding: 0.5em; font-weight: bold; margin: 0.6em 0; }
  .inconsistent { background: #a33; color: white; }
  .consistent { background: #2a7; color: white; }
  .inconclusive { background: #b80; color: white; }
  .error-banner { background: #555; color: white; }
  pre { margin: 0; white-space: pre-wrap; }
</style>
</head>
<body>
  <h3>Dynamic inconsistency inspection</h3>
  <label>Function:
    <select id="fn">${options}</select>
  </label>
  <table><tr><th>parameter</th><th>type</th><th>value (NULL for SQL NULL)</th></tr>
  ${rows}
  </table>
  <button id="submit"${state.busy ? ' disabled' : ''}>
    ${state.busy ? 'Inspecting…' : 'Inspect inconsistency'}
  </button>
  ${banner}
  ${evidence}
  <script>
    const vscode = acquireVsCodeApi();
    document.getElementById('submit').addEventListener('click', () => {
      const values = Array.from(document.querySelectorAll('input[data-index]'))
        .map((el) => el.value);
      vscode.postMessage({ kind: 'submit', values });
    });
    document.getElementById('fn').addEventListener('change', (ev) => {
      vscode.postMessage({ kind: 'select', name: ev.target.value });
    });
    document.querySelectorAll('input[data-index]').forEach((el) => {
      el.addEventListener('input', () => {
        vscode.postMessage({
          kind: 'value',
          index: Number(el.dataset.index),
          value: el.value,
        });
      });
    });
  </script>
</body>
</html>`;
}
function escapeHtml(text) {
    return text
        .replace(/&/g, '&amp;')
        .replace(/</g, '&lt;')
        .replace(/>/g, '&gt;')
        .replace(/"/g, '&quot;');
}
//# sourceMappingURL=panelState.js.map