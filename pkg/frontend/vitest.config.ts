import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globals: true,
    environment: "node",
    testTimeout: 30_000,
    // the integration file owns a single live server; keep files sequential
    fileParallelism: false,
  },
});
