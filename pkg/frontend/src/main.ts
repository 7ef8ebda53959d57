import { ApiClient } from "./api.js";
import { LocalStorageCache, QueueStore } from "./store.js";
import { mount } from "./view.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(location.search).get(name) ?? fallback;
}

async function boot(): Promise<void> {
  const api = new ApiClient({
    baseUrl: param("service", "http://127.0.0.1:8400"),
    token: param("token", ""),
  });
  const store = new QueueStore(api, new LocalStorageCache(), param("reviewer", "reviewer"));
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  mount(root, store);
  await store.init();
  await store.refresh();
  setInterval(() => void store.refresh(), 15_000);
}

void boot();
