/**
 * Server side of the oracle wire protocol.
 *
 * Text lines, UTF-8, "\n"-terminated:
 *   C: HELLO <n_features> <kinds>     kinds = comma-separated c|n
 *   S: OK | ERR <msg>
 *   C: PREDICT <v1>,<v2>,...          numerics in decimal, categoricals
 *   S: 0 | 1                          verbatim with "," escaped as %2C
 *   C: BATCH <k>                      followed by k PREDICT-style payload lines
 *   S: k label lines (one per payload line, in order)
 *   C: BYE                            server closes
 *
 * Malformed traffic answers "ERR <msg>" and the session continues; only BYE
 * (or transport EOF) ends it.
 */

export type Kind = "c" | "n";

export interface Model {
  kinds: Kind[];
  predict(values: Array<string | number>): unknown;
}

export type LabelMap = Map<string, number>;

export function unescapeValue(raw: string): string {
  return raw.replaceAll("%2C", ",");
}

export function parseLabelMap(spec: string): LabelMap {
  const map: LabelMap = new Map();
  for (const part of spec.split(",")) {
    const [name, value] = part.split("=");
    if (name === undefined || value === undefined || (value !== "0" && value !== "1")) {
      throw new Error(`bad label mapping ${part}; expected name=0 or name=1`);
    }
    map.set(name, Number(value));
  }
  return map;
}

export function mapLabel(output: unknown, labels?: LabelMap): number | null {
  if (labels !== undefined) {
    const mapped = labels.get(String(output));
    return mapped === undefined ? null : mapped;
  }
  if (output === 0 || output === 1) return output;
  if (output === false) return 0;
  if (output === true) return 1;
  if (output === "0") return 0;
  if (output === "1") return 1;
  return null;
}

export interface Session {
  handleLine(line: string): string[];
  readonly closed: boolean;
}

export function createSession(model: Model, labels?: LabelMap): Session {
  let pendingBatch = 0;
  let closed = false;

  const predictReply = (payload: string): string => {
    const parts = payload.split(",");
    if (parts.length !== model.kinds.length) {
      return `ERR malformed record: expected ${model.kinds.length} values, got ${parts.length}`;
    }
    const values: Array<string | number> = new Array(parts.length);
    for (let i = 0; i < parts.length; i++) {
      if (model.kinds[i] === "n") {
        const num = Number(parts[i]);
        if (Number.isNaN(num)) {
          return `ERR malformed record: bad number ${parts[i]}`;
        }
        values[i] = num;
      } else {
        values[i] = unescapeValue(parts[i]!);
      }
    }
    let output: unknown;
    try {
      output = model.predict(values);
    } catch {
      return "ERR model-failure";
    }
    const label = mapLabel(output, labels);
    if (label === null) return "ERR label-unmappable";
    return String(label);
  };

  return {
    get closed() {
      return closed;
    },
    handleLine(line: string): string[] {
      if (closed) return [];
      if (pendingBatch > 0) {
        pendingBatch -= 1;
        return [predictReply(line)];
      }
      if (line === "BYE") {
        closed = true;
        return [];
      }
      if (line.startsWith("HELLO")) {
        const parts = line.split(" ");
        if (parts.length !== 3 || !/^\d+$/.test(parts[1]!)) {
          return ["ERR malformed hello"];
        }
        const n = Number(parts[1]);
        if (n !== model.kinds.length || parts[2] !== model.kinds.join(",")) {
          return ["ERR schema mismatch"];
        }
        return ["OK"];
      }
      if (line.startsWith("PREDICT ")) {
        return [predictReply(line.slice("PREDICT ".length))];
      }
      if (line.startsWith("BATCH ")) {
        const count = Number(line.slice("BATCH ".length));
        if (!Number.isInteger(count) || count < 0) {
          return ["ERR malformed batch count"];
        }
        pendingBatch = count;
        return [];
      }
      return [`ERR unknown command ${line.split(" ")[0] ?? ""}`];
    },
  };
}
