/** Figure specification shared by the CLI flags and --spec JSON files. */

export type FigureKind = "track" | "squeezing" | "error" | "bound-surface";
export type AxisUnits = "rad_s" | "hz" | "pt";

export interface FigureSpec {
  kind: FigureKind;
  /** ensemble CSV (track, squeezing, error) */
  ensemble?: string;
  /** sample-trajectory CSV (track) */
  trajectory?: string;
  /** bound-table CSV (bound-surface) */
  bound?: string;
  /** confidence-band half-width in units of sqrt(aMSE); default 2 */
  band?: number;
  /** y-axis units for track figures; default rad_s */
  units?: AxisUnits;
  out: string;
}

export const KINDS: FigureKind[] = ["track", "squeezing", "error", "bound-surface"];

// Rb-87 ground-state gyromagnetic ratio, rad s^-1 T^-1
export const GAMMA_RB87 = 4.3970497e10;

export function unitFactor(units: AxisUnits): { factor: number; label: string } {
  switch (units) {
    case "hz":
      return { factor: 1 / (2 * Math.PI), label: "Hz" };
    case "pt":
      return { factor: 1e12 / GAMMA_RB87, label: "pT" };
    default:
      return { factor: 1, label: "rad/s" };
  }
}

export function validateSpec(spec: FigureSpec): void {
  if (!KINDS.includes(spec.kind)) {
    throw new Error(`unknown figure kind '${spec.kind}' (want ${KINDS.join(", ")})`);
  }
  if (!spec.out) {
    throw new Error("output path is required");
  }
  if (spec.band !== undefined && !(spec.band > 0)) {
    throw new Error("band multiplier must be > 0");
  }
  if (spec.kind === "bound-surface") {
    if (!spec.bound) throw new Error("bound-surface needs --bound CSV");
  } else if (!spec.ensemble) {
    throw new Error(`${spec.kind} needs --ensemble CSV`);
  }
  if (spec.kind === "track" && !spec.trajectory) {
    throw new Error("track needs --trajectory CSV");
  }
}
