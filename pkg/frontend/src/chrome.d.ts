/** Minimal ambient declarations for the extension APIs this project uses. */

interface ChromeTab {
  id?: number;
  url?: string;
}

interface ChromeMessageSender {
  tab?: ChromeTab;
}

interface ChromeEvent<T extends (...args: never[]) => unknown> {
  addListener(callback: T): void;
}

declare namespace chrome {
  namespace runtime {
    function sendMessage(message: unknown): Promise<unknown>;
    function getURL(path: string): string;
    const onMessage: ChromeEvent<
      (message: unknown, sender: ChromeMessageSender, sendResponse: (r?: unknown) => void) => void
    >;
    const lastError: { message?: string } | undefined;
  }

  namespace action {
    const onClicked: ChromeEvent<(tab: ChromeTab) => void>;
  }

  namespace scripting {
    function executeScript(injection: {
      target: { tabId: number };
      files: string[];
    }): Promise<unknown>;
  }

  namespace windows {
    function create(createData: {
      url: string;
      type?: string;
      width?: number;
      height?: number;
    }): Promise<unknown>;
  }

  namespace storage {
    interface StorageArea {
      get(keys: Record<string, unknown>): Promise<Record<string, unknown>>;
      set(items: Record<string, unknown>): Promise<void>;
    }
    const sync: StorageArea;
  }
}
