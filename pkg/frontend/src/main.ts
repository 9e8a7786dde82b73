import "./style.css";
import { ApiClient } from "./api";
import { createStudio } from "./ui";

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "");
const seedParam = params.get("seed");
const seed = seedParam === null ? undefined : Number(seedParam);

createStudio(document.getElementById("app")!, api, { seed }).catch((err) => {
  document.getElementById("app")!.textContent = `failed to start: ${err}`;
});
