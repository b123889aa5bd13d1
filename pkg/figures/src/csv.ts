/** Minimal CSV reading for the simulator's numeric tables. */

import { readFileSync } from "fs";

export class MissingColumnError extends Error {
  constructor(public readonly column: string, public readonly path: string) {
    super(`column '${column}' not found in ${path}`);
    this.name = "MissingColumnError";
  }
}

export interface Table {
  path: string;
  columns: string[];
  rows: number[][];
}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8").trim();
  if (text.length === 0) {
    return { path, columns: [], rows: [] };
  }
  const lines = text.split(/\r?\n/);
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    if (lines[i].trim() === "") continue;
    rows.push(lines[i].split(",").map((v) => Number(v)));
  }
  return { path, columns, rows };
}

export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new MissingColumnError(name, table.path);
  }
  return table.rows.map((r) => r[idx]);
}
