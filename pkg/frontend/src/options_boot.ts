/** Options page: the service base URL is the only setting. */

const DEFAULT_BASE_URL = "http://127.0.0.1:8000";

async function main(): Promise<void> {
  const input = document.getElementById("service-url") as HTMLInputElement | null;
  const save = document.getElementById("save") as HTMLButtonElement | null;
  const status = document.getElementById("status");
  if (!input || !save || !status) return;

  const stored = await chrome.storage.sync.get({ serviceBaseUrl: DEFAULT_BASE_URL });
  input.value = (stored.serviceBaseUrl as string) || DEFAULT_BASE_URL;

  save.addEventListener("click", () => {
    void chrome.storage.sync.set({ serviceBaseUrl: input.value.trim() }).then(() => {
      status.textContent = "Saved.";
      setTimeout(() => (status.textContent = ""), 1500);
    });
  });
}

void main();
