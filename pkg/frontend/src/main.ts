import { renderDashboard } from "./dashboard.js";

const root = document.getElementById("app");
if (root) {
  void renderDashboard(root);
}
