#!/usr/bin/env node
import { runPlotField } from "../cli.js";

process.exit(runPlotField(process.argv.slice(2)));
