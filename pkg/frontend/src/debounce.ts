/** Trailing-edge debounce: a burst of calls collapses into one, made after
 * the burst has been quiet for `waitMs`, with the latest arguments. */

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  /** Drops any pending call. */
  cancel(): void;
  /** Runs a pending call immediately. */
  flush(): void;
  /** True while a call is scheduled. */
  pending(): boolean;
}

export function trailingDebounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let lastArgs: A | null = null;

  const fire = (): void => {
    timer = null;
    const args = lastArgs as A;
    lastArgs = null;
    fn(...args);
  };

  const debounced = (...args: A): void => {
    lastArgs = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(fire, waitMs);
  };

  debounced.cancel = (): void => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    lastArgs = null;
  };

  debounced.flush = (): void => {
    if (timer === null) return;
    clearTimeout(timer);
    fire();
  };

  debounced.pending = (): boolean => timer !== null;

  return debounced;
}
