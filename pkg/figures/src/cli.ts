/** Figure CLI: `node dist/cli.js --spec spec.json` or individual flags.
 *
 * Exit codes: 0 rendered (or warned about an empty series), 2 bad
 * arguments/spec, 4 missing column in an input table.
 */

import { readFileSync, writeFileSync } from "fs";

import { MissingColumnError } from "./csv.js";
import { render } from "./figures.js";
import { FigureSpec, KINDS, validateSpec } from "./spec.js";

function parseArgs(argv: string[]): FigureSpec {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near '${key}'`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  if (flags.has("spec")) {
    const spec = JSON.parse(readFileSync(flags.get("spec")!, "utf8")) as FigureSpec;
    if (flags.has("out")) spec.out = flags.get("out")!;
    return spec;
  }
  return {
    kind: (flags.get("kind") ?? "") as FigureSpec["kind"],
    ensemble: flags.get("ensemble"),
    trajectory: flags.get("trajectory"),
    bound: flags.get("bound"),
    band: flags.has("band") ? Number(flags.get("band")) : undefined,
    units: flags.get("units") as FigureSpec["units"],
    out: flags.get("out") ?? "",
  };
}

export function main(argv: string[]): number {
  let spec: FigureSpec;
  try {
    spec = parseArgs(argv);
    validateSpec(spec);
  } catch (err) {
    console.error(`argument error: ${(err as Error).message}`);
    console.error(`usage: cli --kind {${KINDS.join("|")}} --ensemble CSV ` +
      "[--trajectory CSV] [--bound CSV] [--band K] [--units rad_s|hz|pt] --out SVG");
    return 2;
  }
  try {
    const svg = render(spec);
    if (svg === null) {
      console.error(`warning: empty input series; not writing ${spec.out}`);
      return 0;
    }
    writeFileSync(spec.out, svg);
    console.log(`wrote ${spec.out}`);
    return 0;
  } catch (err) {
    if (err instanceof MissingColumnError) {
      console.error(`input error: ${err.message}`);
      return 4;
    }
    console.error(`render error: ${(err as Error).message}`);
    return 2;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
