/** Management panels: thin views over the command-channel opcodes. */

import type { CmdChannel } from "./cmd.js";
import { RemoteError } from "./cmd.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className) node.className = className;
  return node;
}

function showError(container: HTMLElement, error: unknown): void {
  const box = el("div", error instanceof Error ? error.message : String(error), "panel-error");
  container.prepend(box);
  setTimeout(() => box.remove(), 6000);
}

export class AppsPanel {
  constructor(
    private cmd: CmdChannel,
    private container: HTMLElement,
  ) {}

  async refresh(): Promise<void> {
    try {
      const apps = await this.cmd.listApps();
      this.container.replaceChildren();
      const table = el("table");
      const head = el("tr");
      for (const col of ["", "package", "version", "name"]) head.append(el("th", col));
      table.append(head);
      for (const app of apps) {
        const row = el("tr");
        row.append(el("td", app.running ? "●" : "", "running-dot"));
        row.append(el("td", app.package));
        row.append(el("td", app.version));
        row.append(el("td", app.name));
        table.append(row);
      }
      this.container.append(table);
      const form = el("div", undefined, "panel-form");
      const pkg = el("input") as HTMLInputElement;
      pkg.placeholder = "com.example.app";
      const file = el("input") as HTMLInputElement;
      file.type = "file";
      const button = el("button", "install");
      button.onclick = async () => {
        const chosen = file.files?.[0];
        if (!chosen || !pkg.value) return;
        try {
          const bytes = new Uint8Array(await chosen.arrayBuffer());
          await this.cmd.installApp(pkg.value, "1.0", bytes, true);
          await this.refresh();
        } catch (error) {
          showError(this.container, error);
        }
      };
      form.append(pkg, file, button);
      this.container.append(form);
    } catch (error) {
      showError(this.container, error);
    }
  }
}

export class ProcessesPanel {
  constructor(
    private cmd: CmdChannel,
    private container: HTMLElement,
  ) {}

  async refresh(): Promise<void> {
    try {
      const processes = await this.cmd.listProcesses();
      this.container.replaceChildren();
      const table = el("table");
      const head = el("tr");
      for (const col of ["pid", "name", "state", "kind", ""]) head.append(el("th", col));
      table.append(head);
      for (const proc of processes) {
        const row = el("tr");
        row.append(el("td", String(proc.pid)));
        row.append(el("td", proc.name));
        row.append(el("td", proc.state));
        row.append(el("td", proc.kind));
        const kill = el("button", "kill");
        kill.onclick = async () => {
          try {
            await this.cmd.killProcess(proc.pid);
            await this.refresh();
          } catch (error) {
            showError(this.container, error);
          }
        };
        const cell = el("td");
        cell.append(kill);
        row.append(cell);
        table.append(row);
      }
      this.container.append(table);
    } catch (error) {
      showError(this.container, error);
    }
  }
}

export class FilesPanel {
  private cwd = "/";

  constructor(
    private cmd: CmdChannel,
    private container: HTMLElement,
  ) {}

  async refresh(): Promise<void> {
    try {
      const nodes = await this.cmd.fsList(this.cwd);
      this.container.replaceChildren();
      const crumbs = el("div", undefined, "crumbs");
      const up = el("button", "..");
      up.onclick = () => {
        this.cwd = this.cwd.replace(/\/[^/]+\/?$/, "") || "/";
        void this.refresh();
      };
      crumbs.append(up, el("span", ` ${this.cwd}`));
      this.container.append(crumbs);

      const table = el("table");
      for (const node of nodes) {
        const row = el("tr");
        const base = node.path.split("/").pop() || node.path;
        if (node.kind === "dir") {
          const link = el("a", base + "/");
          link.href = "#";
          link.onclick = (event) => {
            event.preventDefault();
            this.cwd = node.path;
            void this.refresh();
          };
          const cell = el("td");
          cell.append(link);
          row.append(cell, el("td", ""), el("td", ""));
        } else {
          row.append(el("td", base), el("td", String(node.size)));
          const actions = el("td");
          const download = el("button", "get");
          download.onclick = async () => {
            try {
              const data = await this.cmd.fsGet(node.path);
              const url = URL.createObjectURL(new Blob([data.slice()]));
              const link = el("a");
              link.href = url;
              link.download = base;
              link.click();
              URL.revokeObjectURL(url);
            } catch (error) {
              showError(this.container, error);
            }
          };
          const remove = el("button", "rm");
          remove.onclick = async () => {
            try {
              await this.cmd.fsRemove(node.path);
              await this.refresh();
            } catch (error) {
              showError(this.container, error);
            }
          };
          actions.append(download, remove);
          row.append(actions);
        }
        table.append(row);
      }
      this.container.append(table);

      const form = el("div", undefined, "panel-form");
      const file = el("input") as HTMLInputElement;
      file.type = "file";
      const upload = el("button", "upload here");
      upload.onclick = async () => {
        const chosen = file.files?.[0];
        if (!chosen) return;
        try {
          const bytes = new Uint8Array(await chosen.arrayBuffer());
          const target = (this.cwd === "/" ? "" : this.cwd) + "/" + chosen.name;
          await this.cmd.fsPut(target, bytes);
          await this.refresh();
        } catch (error) {
          showError(this.container, error);
        }
      };
      form.append(file, upload);
      this.container.append(form);
    } catch (error) {
      if (error instanceof RemoteError) this.cwd = "/";
      showError(this.container, error);
    }
  }
}

export class StatusPanel {
  constructor(
    private cmd: CmdChannel,
    private container: HTMLElement,
    private alertsBox: HTMLElement,
  ) {
    cmd.onAlert = (message) => this.notify(message);
  }

  notify(message: string): void {
    const toast = el("div", `⚠ ${message}`, "alert-toast");
    this.alertsBox.append(toast);
    setTimeout(() => toast.remove(), 8000);
  }

  async refresh(): Promise<void> {
    try {
      const status = await this.cmd.status();
      this.container.replaceChildren();
      const rows: Array<[string, string]> = [
        ["battery", `${status.battery}%`],
        ["uptime", `${status.uptimeS}s`],
        ["screen", status.screenOn ? "on" : "off"],
        ["network", status.network],
        ["alerts", status.alerts.length ? status.alerts.join("; ") : "none"],
      ];
      const table = el("table");
      for (const [key, value] of rows) {
        const row = el("tr");
        row.append(el("th", key), el("td", value));
        table.append(row);
      }
      this.container.append(table);
    } catch (error) {
      showError(this.container, error);
    }
  }
}
