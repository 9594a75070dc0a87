// DOM wiring: poll the service every second and render the console.

import { ApiError, ServiceClient } from "./api.js";
import { ConsoleViewModel } from "./model.js";

const POLL_MS = 1000;

const client = new ServiceClient();
const model = new ConsoleViewModel();

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const banner = element<HTMLDivElement>("banner");
const budgetGauge = element<HTMLSpanElement>("budget");
const queueBadge = element<HTMLSpanElement>("queue-badge");
const requestCard = element<HTMLDivElement>("request");
const utterance = element<HTMLParagraphElement>("utterance");
const requestMeta = element<HTMLParagraphElement>("request-meta");
const contextList = element<HTMLParagraphElement>("cluster-context");
const labelInput = element<HTMLInputElement>("label-input");
const classOptions = element<HTMLDataListElement>("class-options");
const submitButton = element<HTMLButtonElement>("submit");
const errorLine = element<HTMLParagraphElement>("error-line");
const reportPanel = element<HTMLDivElement>("report");

labelInput.addEventListener("input", () => {
  model.draftLabel = labelInput.value;
  render();
});

submitButton.addEventListener("click", () => {
  void submitCurrent();
});
labelInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter") void submitCurrent();
});

async function submitCurrent(): Promise<void> {
  const request = model.currentRequest;
  if (!model.canSubmit || !request) return;
  const label = model.draftLabel.trim();
  model.beginSubmit();
  render();
  try {
    const ack = await client.submitLabel(request.request_id, label);
    model.completeSubmit(request, ack);
  } catch (failure) {
    if (failure instanceof ApiError) {
      model.failSubmit(failure.status, failure.message);
    } else {
      model.failSubmit(null, String(failure));
    }
  }
  await poll();
}

async function poll(): Promise<void> {
  try {
    const state = await client.state();
    const queue = state.done ? [] : await client.queue();
    const classes = (await client.classes()).classes;
    model.applyPoll(state, queue, classes);
    if (state.has_report && !model.report) {
      model.applyReport(await client.report());
    }
  } catch {
    model.applyConnectionError();
  }
  render();
}

function render(): void {
  banner.textContent = model.banner;
  banner.dataset.connection = model.connection;

  const remaining = model.remainingBudget;
  budgetGauge.textContent =
    model.state && model.state.budget
      ? `${remaining} of ${model.state.budget.total} labels left`
      : "budget unknown";
  queueBadge.textContent = String(model.queueDepth);

  const request = model.currentRequest;
  requestCard.hidden = request === null;
  if (request) {
    utterance.textContent = request.text;
    requestMeta.textContent =
      `point ${request.point_id} | phase ${request.phase}` +
      (request.cluster_id === null ? "" : ` | cluster ${request.cluster_id}`);
    const context = model.clusterContext(request);
    contextList.textContent = context.length
      ? `cluster labels so far: ${context.join(", ")}`
      : "no labels in this cluster yet";
  }

  if (labelInput.value !== model.draftLabel) labelInput.value = model.draftLabel;
  classOptions.replaceChildren(
    ...model.classes.map((name) => {
      const option = document.createElement("option");
      option.value = name;
      return option;
    }),
  );
  submitButton.disabled = !model.canSubmit;
  errorLine.textContent = model.lastError ?? "";

  reportPanel.hidden = model.report === null;
  if (model.report) {
    const metrics = model.report.metrics;
    const discovery = model.report.discovery;
    reportPanel.textContent =
      `discovered ${discovery.found}/${discovery.total_unknown} new classes` +
      (metrics
        ? ` | accuracy ${(metrics.accuracy * 100).toFixed(1)}%` +
          ` | macro-F1 ${(metrics.macro_f1 * 100).toFixed(1)}%`
        : "");
  }
}

void poll();
setInterval(() => void poll(), POLL_MS);
