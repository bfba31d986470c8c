import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 600_000,
    hookTimeout: 600_000,
    // tfjs state is process-global; keep tests in one thread
    pool: "threads",
    poolOptions: { threads: { singleThread: true } },
  },
});
