import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    testTimeout: 90000,
    hookTimeout: 90000,
    // the round-trip suite owns a live service on a fixed port
    fileParallelism: false,
  },
});
