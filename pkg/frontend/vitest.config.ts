import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts", "e2e/**/*.test.ts"],
    testTimeout: 30000,
    hookTimeout: 60000,
    // the e2e suite drives one shared server; keep files sequential
    fileParallelism: false,
  },
});
