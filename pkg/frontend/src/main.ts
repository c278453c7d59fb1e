import { SessionApi } from "./api.js";
import { App } from "./ui.js";

const app = new App(new SessionApi(""));
void app.start();
