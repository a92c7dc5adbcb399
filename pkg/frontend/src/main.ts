import { GatewayClient } from "./api.js";
import { ConsoleView } from "./render.js";
import { ConsoleStore } from "./state.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("gateway") ?? "";
const expertId = params.get("expert") ?? "human:console";

const client = new GatewayClient(base);
const store = new ConsoleStore(client, expertId);
new ConsoleView(document.getElementById("app")!, store);

void (async () => {
  await store.bootstrap();
  store.connect();
  const first = store.state.roster[0];
  if (first) {
    await store.selectPatient(first.patient_id);
  }
})();
