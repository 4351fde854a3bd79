/** Cross-validation fold assignment, deterministic for a given seed. */
import { Rng } from "./prng.js";

export interface Fold {
  train: string[];
  val: string[];
  /** Per-fold test case (ircad scheme); unused for bullitt. */
  test: string[];
}

export interface FoldSpec {
  scheme: "ircad" | "bullitt";
  seed: number;
  /** Global held-out test set (bullitt scheme); empty for ircad. */
  test: string[];
  folds: Fold[];
}

const N_FOLDS = 5;

function splitRoundRobin(cases: string[], k: number): string[][] {
  const folds: string[][] = Array.from({ length: k }, () => []);
  cases.forEach((c, i) => folds[i % k].push(c));
  return folds;
}

/** Assign cases to folds.
 *
 * bullitt: 15% of the cases (rounded) are held out as a fixed test set,
 * the rest run 5-fold cross-validation.  33 cases gives 5 test + 28 CV.
 *
 * ircad: straight 5-fold split, then one validation case per fold is
 * promoted to act as that fold's test volume.  20 cases gives 5 folds of
 * 4 with 1 promoted case each.
 */
export function makeFolds(cases: string[], scheme: "ircad" | "bullitt", seed = 0): FoldSpec {
  if (cases.length < 6) {
    throw new Error(`need at least 6 cases, got ${cases.length}`);
  }
  if (new Set(cases).size !== cases.length) {
    throw new Error("duplicate case ids");
  }
  const rng = new Rng(seed);
  const shuffled = rng.shuffle(cases.slice());

  if (scheme === "bullitt") {
    const nTest = Math.round(0.15 * shuffled.length);
    const test = shuffled.slice(0, nTest).sort();
    const cv = shuffled.slice(nTest);
    const valFolds = splitRoundRobin(cv, N_FOLDS);
    const folds: Fold[] = valFolds.map((val, i) => ({
      train: valFolds
        .filter((_, j) => j !== i)
        .flat()
        .sort(),
      val: val.slice().sort(),
      test: [],
    }));
    return { scheme, seed, test, folds };
  }

  if (scheme !== "ircad") {
    throw new Error(`unknown fold scheme: ${scheme}`);
  }
  const parts = splitRoundRobin(shuffled, N_FOLDS);
  const folds: Fold[] = parts.map((part, i) => {
    const test = [part[0]];
    const val = part.slice(1).sort();
    const train = parts
      .filter((_, j) => j !== i)
      .flat()
      .sort();
    return { train, val, test };
  });
  return { scheme, seed, test: [], folds };
}
