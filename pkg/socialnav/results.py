import os

import pandas as pd
import tabulate


def write_results(results, output):
    folder = os.path.dirname(output)
    if folder:
        os.makedirs(folder, exist_ok=True)

    results.to_csv(output, index=False, float_format='%.6f')
    return output


def summarize(results, by='variant'):
    """Mean of every numeric column, grouped by ``by``.

    Args:
        results (pandas.DataFrame or list):
            One table or several tables with the same columns.
        by (str):
            Column to group on. Defaults to ``'variant'``.

    Returns:
        pandas.DataFrame
    """
    if isinstance(results, pd.DataFrame):
        results = [results]

    combined = pd.concat(list(results), ignore_index=True)
    return combined.groupby(by, sort=False).mean(numeric_only=True).reset_index()


def format_table(results):
    return tabulate.tabulate(results, tablefmt='github', headers=results.columns,
                             showindex=False, floatfmt='.4f')
